"""
Command-line front end.

    scamr run --case f13 --eps1 1e-2 5e-3 1e-3 --out-csv f13.csv
    scamr run --eval-cmd "python3 model.py" --dim 4 --eps1 1e-3

External evaluators speak a line protocol: one request line of
space-separated coordinates on stdin, one response line holding a single
value on stdout.
"""

import argparse
import json
import logging
import os
import queue
import shlex
import subprocess
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bench import (
    EllipticSolverSpec,
    get_case,
    normalized_l2,
    relative_mean_error,
    rmse,
)
from .driver import RunLog, ScamrConfig, estimate_mean, extract_value, run_scamr
from .errors import ConfigError, EvaluationError
from .grids import Element

logger = logging.getLogger("scamr")

CSV_HEADER = "case,dim,eps1,eps2,evaluations,rmse,normalized_l2,relative_mean_error,wall_seconds"

EXIT_CONFIG = 2
EXIT_EVALUATION = 3


class SubprocessModel:
    """Black-box model served by a child process over the line protocol."""

    def __init__(self, command, timeout=60.0):
        self.command = command
        self.timeout = timeout
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self.proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise ConfigError(f"cannot start evaluator {command!r}: {exc}") from exc
        self._lines = queue.Queue()
        self._lock = threading.Lock()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        request = " ".join(repr(float(v)) for v in x) + "\n"
        with self._lock:
            try:
                self.proc.stdin.write(request)
                self.proc.stdin.flush()
            except (BrokenPipeError, OSError, ValueError):
                raise EvaluationError(x, f"evaluator exited with code {self.proc.poll()}") from None
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                raise EvaluationError(x, f"evaluator timed out after {self.timeout}s") from None
        if line is None:
            raise EvaluationError(x, f"evaluator exited with code {self.proc.wait()}")
        try:
            return float(line.strip())
        except ValueError:
            raise EvaluationError(x, f"evaluator replied {line.strip()!r}") from None

    def close(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
                self.proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self.proc.kill()
                self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class RunConfig:
    case: str = None
    eval_cmd: str = None
    dim: int = None
    bounds: tuple = (0.0, 1.0)
    eps1: list = field(default_factory=lambda: [1e-2])
    eps2: float = None
    max_iterations: int = 10
    min_volume_fraction: float = 1e-3
    validate: int = None
    seed: int = 0
    out_csv: str = None
    out_json: str = None
    log: str = None
    timing: bool = True
    workers: int = 1
    closed_branch: bool = False
    sigma: float = 2.0
    resolution: int = 64
    timeout: float = 60.0

    def __post_init__(self):
        if (self.case is None) == (self.eval_cmd is None):
            raise ConfigError("exactly one of case / eval_cmd is required")
        if self.eval_cmd is not None and self.dim is None:
            raise ConfigError("dim is required with eval_cmd")
        if self.dim is not None and self.dim < 1:
            raise ConfigError(f"dim must be positive, got {self.dim}")
        if isinstance(self.eps1, (int, float)):
            self.eps1 = [self.eps1]
        if not self.eps1:
            raise ConfigError("eps1 needs at least one value")
        if self.validate is not None and self.validate < 1:
            raise ConfigError(f"validate must be >= 1, got {self.validate}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        lo, hi = self.bounds
        if not lo < hi:
            raise ConfigError(f"bounds must satisfy lo < hi, got {self.bounds}")
        # surface tolerance errors before any model call
        for e in self.eps1:
            self.scamr_config(e)

    def scamr_config(self, eps1):
        return ScamrConfig(
            epsilon1=eps1,
            epsilon2=eps1 if self.eps2 is None else self.eps2,
            max_iterations=self.max_iterations,
            min_volume_fraction=self.min_volume_fraction,
            rng_seed=self.seed,
        )


def _default_validation(run, case):
    if case is None or case.id.startswith("elliptic"):
        return 1000
    if case.id.startswith("f13"):
        return 1_000_000
    return 100_000


def _fmt(x):
    return "" if x is None else repr(float(x))


def _bundle_path(path, index, total):
    if total == 1:
        return path
    root, ext = os.path.splitext(path)
    return f"{root}.{index}{ext}"


def execute(run, stdout=None):
    """Run every tolerance in ``run.eps1``; returns the CSV rows written."""
    stdout = sys.stdout if stdout is None else stdout
    case = None
    if run.case is not None:
        case = get_case(
            run.case,
            run.dim,
            closed_branch=run.closed_branch,
            sigma=run.sigma,
            solver=EllipticSolverSpec(run.resolution),
        )
        model, domain, label, dim = case, case.domain, case.id, case.dim
    else:
        dim = run.dim
        domain = Element.box(np.full(dim, run.bounds[0]), np.full(dim, run.bounds[1]))
        model = SubprocessModel(run.eval_cmd, run.timeout)
        label = "external"

    n_val = run.validate or _default_validation(run, case)
    rng = np.random.default_rng(run.seed)
    X = domain.lo + rng.random((n_val, dim)) * domain.widths
    exact = None

    log_fh = open(run.log, "w", encoding="utf-8") if run.log else None
    executor = ThreadPoolExecutor(run.workers) if run.workers > 1 else None
    rows = []
    try:
        for k, eps1 in enumerate(run.eps1):
            cfg = run.scamr_config(eps1)
            t0 = time.perf_counter()
            s = run_scamr(model, domain, cfg, log=RunLog(log_fh), executor=executor)
            wall = time.perf_counter() - t0
            if exact is None:
                exact = case.batch(X) if case is not None else np.array([model(x) for x in X])
            approx = extract_value(s, X)
            nl2 = normalized_l2(exact, approx) if np.any(exact != 0) else None
            rme = None
            if case is not None and case.exact_mean:
                rme = relative_mean_error(case.exact_mean, estimate_mean(s))
            row = ",".join([
                label,
                str(dim),
                _fmt(cfg.epsilon1),
                _fmt(cfg.epsilon2),
                str(s.total_evaluations),
                _fmt(rmse(exact, approx)),
                _fmt(nl2),
                _fmt(rme),
                _fmt(wall) if run.timing else "",
            ])
            rows.append(row)
            logger.info("%s eps1=%g: %d evaluations", label, eps1, s.total_evaluations)
            if run.out_json:
                s.save(_bundle_path(run.out_json, k, len(run.eps1)))
    finally:
        if executor is not None:
            executor.shutdown()
        if log_fh is not None:
            log_fh.close()
        if isinstance(model, SubprocessModel):
            model.close()

    text = CSV_HEADER + "\n" + "".join(r + "\n" for r in rows)
    if run.out_csv:
        with open(run.out_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return rows


_FILE_KEYS = {f for f in RunConfig.__dataclass_fields__}


def build_parser():
    parser = argparse.ArgumentParser(prog="scamr", description=__doc__.strip().splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="build a surrogate and report its error")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--case", help="benchmark id, e.g. f7, f14-n200, elliptic-n25")
    src.add_argument("--eval-cmd", dest="eval_cmd", help="external evaluator command")
    p.add_argument("--dim", type=int)
    p.add_argument("--bounds", type=float, nargs=2, metavar=("LO", "HI"),
                   help="per-dimension interval for --eval-cmd (default 0 1)")
    p.add_argument("--eps1", type=float, nargs="+", help="one or more tolerances to sweep")
    p.add_argument("--eps2", type=float, help="pairwise tolerance (default: eps1 of each run)")
    p.add_argument("--max-iter", dest="max_iterations", type=int)
    p.add_argument("--vmin", dest="min_volume_fraction", type=float)
    p.add_argument("--validate", type=int, help="number of validation samples")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON file with run settings; flags override it")
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--log", help="JSON-lines run log")
    p.add_argument("--no-timing", dest="timing", action="store_false", default=None,
                   help="leave wall_seconds empty for reproducible CSVs")
    p.add_argument("--workers", type=int, help="threads for concurrent model calls")
    p.add_argument("--closed-branch", dest="closed_branch", action="store_true", default=None)
    p.add_argument("--sigma", type=float)
    p.add_argument("--resolution", type=int, help="elliptic grid resolution")
    p.add_argument("--timeout", type=float, help="seconds to wait for an external evaluator reply")
    return parser


def _run_config(args):
    settings = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                settings = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(settings, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(settings) - _FILE_KEYS)
        if unknown:
            raise ConfigError(f"unknown config fields {unknown}")
    for key in _FILE_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            settings[key] = v
    if "bounds" in settings:
        settings["bounds"] = tuple(settings["bounds"])
    return RunConfig(**settings)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        run = _run_config(args)
        execute(run)
    except ConfigError as exc:
        print(f"scamr: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvaluationError as exc:
        done = "" if exc.evaluations is None else f" after {exc.evaluations} cached evaluations"
        print(f"scamr: evaluation failed{done}: {exc}", file=sys.stderr)
        return EXIT_EVALUATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
