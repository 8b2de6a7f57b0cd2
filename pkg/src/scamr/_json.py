"""Minimal JSON writer that prints doubles with 17 significant digits."""

import math

import numpy as np


def _fmt_float(x):
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    s = format(x, ".17g")
    # keep floats recognisable as floats on reload
    if s.lstrip("-").isdigit():
        s += ".0"
    return s


def dumps(obj, indent=None, _level=0):
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        items = [f"{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return _wrap("{", "}", items, indent, _level)
    if isinstance(obj, (list, tuple)):
        items = [dumps(v, indent, _level + 1) for v in obj]
        return _wrap("[", "]", items, indent, _level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _wrap(open_, close, items, indent, level):
    if not items:
        return open_ + close
    # numeric leaf lists stay on one line
    if indent is None or all("\n" not in i and not i.startswith(("{", "[")) for i in items):
        return open_ + ", ".join(items) + close
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    return open_ + "\n" + ",\n".join(pad + i for i in items) + "\n" + end + close
