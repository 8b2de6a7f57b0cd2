"""
Memoised black-box evaluation.

Every model call goes through an :class:`EvaluationCache`; the number of
distinct stored points is the cost of a run.  Keys are coordinates rounded to
12 decimals so that affine-map round-off cannot defeat reuse.
"""

import threading
from concurrent.futures import Future

import numpy as np

from . import _kernels
from .errors import EvaluationError

KEY_DIGITS = 12
_HARVEST_TOL = 1e-11


class EvaluationCache:
    """
    Insert-or-get store of exact model outputs.

    ``model`` maps a 1-D coordinate array to a float.  If ``executor`` is
    given, the missing points of a batch are evaluated concurrently on it;
    the store itself is guarded by a lock so each point is evaluated once.
    """

    def __init__(self, model, dim, executor=None, key_digits=KEY_DIGITS):
        self.model = model
        self.dim = int(dim)
        self.executor = executor
        self.key_digits = key_digits
        self._lock = threading.Lock()
        self._index = {}
        self._pending = {}
        # amortised-growth buffers; rows [0, len) are filled
        self._pts = np.empty((16, self.dim))
        self._vals = np.empty(16)
        self._n = 0

    def __len__(self):
        return self._n

    @property
    def count(self):
        return self._n

    def key(self, point):
        return tuple(np.round(np.asarray(point, dtype=float), self.key_digits).tolist())

    def _call(self, point):
        try:
            value = float(self.model(point))
        except EvaluationError as exc:
            if exc.evaluations is None:
                exc.evaluations = self.count
            raise
        except Exception as exc:
            raise EvaluationError(point, f"model raised {exc!r}", evaluations=self.count) from exc
        if not np.isfinite(value):
            raise EvaluationError(point, f"model returned {value}", evaluations=self.count)
        return value

    def evaluate(self, points):
        """Values at ``(M, dim)`` points, calling the model only for unseen keys."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        keys = [self.key(p) for p in points]
        owned = []
        with self._lock:
            for k, p in zip(keys, points):
                if k in self._index or k in self._pending:
                    continue
                fut = Future()
                self._pending[k] = fut
                owned.append((k, p, fut))
        if owned:
            self._run(owned)
        out = np.empty(len(keys))
        for i, k in enumerate(keys):
            idx = self._index.get(k)
            if idx is None:
                fut = self._pending.get(k)
                if fut is not None:
                    fut.result()
                idx = self._index[k]
            out[i] = self._vals[idx]
        return out

    def _run(self, owned):
        if self.executor is not None and len(owned) > 1:
            futures = [self.executor.submit(self._call, p) for _, p, _ in owned]
            results = [f.result for f in futures]
        else:
            results = [lambda p=p: self._call(p) for _, p, _ in owned]
        values = []
        try:
            for get in results:
                values.append(get())
        except Exception as exc:
            # keep what finished so the failure report counts it
            self._commit(owned[: len(values)], values)
            self._fail(owned[len(values):], exc)
            if isinstance(exc, EvaluationError):
                exc.evaluations = self.count
            raise
        self._commit(owned, values)

    def _commit(self, owned, values):
        # insertion order follows request order, independent of thread timing
        with self._lock:
            self._reserve(self._n + len(owned))
            for (k, p, fut), v in zip(owned, values):
                self._index[k] = self._n
                self._pts[self._n] = p
                self._vals[self._n] = v
                self._n += 1
                del self._pending[k]
                fut.set_result(v)

    def _reserve(self, size):
        if size <= self._pts.shape[0]:
            return
        cap = max(size, 2 * self._pts.shape[0])
        pts = np.empty((cap, self.dim))
        vals = np.empty(cap)
        pts[: self._n] = self._pts[: self._n]
        vals[: self._n] = self._vals[: self._n]
        self._pts, self._vals = pts, vals

    def _fail(self, owned, exc):
        with self._lock:
            for k, _, fut in owned:
                if self._pending.pop(k, None) is not None and not fut.done():
                    fut.set_exception(exc)

    def points(self):
        """Stored points as an ``(N, dim)`` array, in insertion order."""
        with self._lock:
            return self._pts[: self._n].copy()

    def values(self):
        with self._lock:
            return self._vals[: self._n].copy()

    def take(self, idx):
        """Stored points and values at insertion indices ``idx``."""
        with self._lock:
            return self._pts[idx], self._vals[idx]

    def in_box(self, lo, hi, tol=_HARVEST_TOL):
        """Indices of stored points inside the closed box [lo, hi]."""
        with self._lock:
            pts = self._pts[: self._n]
        if pts.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        mask = _kernels.in_box(pts, np.asarray(lo, dtype=float), np.asarray(hi, dtype=float), tol)
        return np.nonzero(mask)[0]

    def harvest(self, lo, hi):
        """Stored points inside the closed box [lo, hi], with values."""
        return self.take(self.in_box(lo, hi))

    def restrict(self, dims, center):
        return SubspaceEvaluator(self, dims, center)


class SubspaceEvaluator:
    """
    View of the cache on the cut through ``center`` spanned by ``dims``:
    local points carry only the ``dims`` coordinates, the rest are pinned.
    """

    def __init__(self, cache, dims, center):
        self.cache = cache
        self.dims = tuple(int(d) for d in dims)
        self._cols = list(self.dims)
        self.center = np.asarray(center, dtype=float)
        if len(self.center) != cache.dim:
            raise ValueError("cut center dimension does not match the cache")

    @property
    def dim(self):
        return len(self.dims)

    @property
    def count(self):
        return self.cache.count

    def embed(self, local):
        local = np.atleast_2d(np.asarray(local, dtype=float))
        full = np.tile(self.center, (local.shape[0], 1))
        full[:, self._cols] = local
        return full

    def evaluate(self, local):
        return self.cache.evaluate(self.embed(local))

    def harvest(self, lo, hi):
        """Cached points of this cut inside the closed local box, with values."""
        full_lo = self.center.copy()
        full_hi = self.center.copy()
        full_lo[self._cols] = lo
        full_hi[self._cols] = hi
        idx = self.cache.in_box(full_lo, full_hi)
        pts, vals = self.cache.take(idx)
        return pts[:, self._cols], vals
