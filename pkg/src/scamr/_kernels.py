"""
Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba implementations are used when numba imports cleanly and the
environment variable ``SCAMR_DISABLE_NUMBA`` is unset (or set to ``0``).
Both paths are always importable as ``numpy_kernels`` / ``numba_kernels`` so
they can be compared against each other.

Sparse multi-index layout used by the design kernels: every basis term is
described by ``nz_dim[k, :]`` / ``nz_deg[k, :]``, the dimensions with a
non-zero degree and those degrees, padded with ``-1`` in ``nz_dim``.
"""

import os
import types

import numpy as np

__all__ = [
    "BACKEND",
    "legendre_design",
    "in_box",
    "locate_boxes",
    "numpy_kernels",
    "numba_kernels",
]


# ----------------------------------------------------------------------------
# pure numpy
# ----------------------------------------------------------------------------

def _legendre_table_np(ref, order):
    # (M, d, order+1) table of P_k(ref)
    table = np.empty(ref.shape + (order + 1,))
    table[..., 0] = 1.0
    if order >= 1:
        table[..., 1] = ref
    for k in range(2, order + 1):
        table[..., k] = ((2 * k - 1) * ref * table[..., k - 1] - (k - 1) * table[..., k - 2]) / k
    return table


def _legendre_design_np(ref, nz_dim, nz_deg, order):
    ref = np.ascontiguousarray(ref, dtype=np.float64)
    m = ref.shape[0]
    k = nz_dim.shape[0]
    out = np.ones((m, k))
    if nz_dim.shape[1] == 0:
        return out
    table = _legendre_table_np(ref, order)
    for t in range(nz_dim.shape[1]):
        dims = nz_dim[:, t]
        valid = dims >= 0
        if not valid.any():
            break
        out[:, valid] *= table[:, dims[valid], nz_deg[valid, t]]
    return out


def _in_box_np(points, lo, hi, tol):
    return np.all((points >= lo - tol) & (points <= hi + tol), axis=1)


def _locate_boxes_np(points, lo, hi, closed):
    idx = np.full(points.shape[0], -1, dtype=np.int64)
    rest = np.arange(points.shape[0])
    for leaf in range(lo.shape[0]):
        if rest.size == 0:
            break
        sub = points[rest]
        upper = np.where(closed[leaf], sub <= hi[leaf], sub < hi[leaf])
        hit = np.all((sub >= lo[leaf]) & upper, axis=1)
        idx[rest[hit]] = leaf
        rest = rest[~hit]
    return idx


numpy_kernels = types.SimpleNamespace(
    legendre_design=_legendre_design_np,
    in_box=_in_box_np,
    locate_boxes=_locate_boxes_np,
)


# ----------------------------------------------------------------------------
# numba
# ----------------------------------------------------------------------------

numba_kernels = None
try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

if njit is not None:

    @njit(cache=True, nogil=True)
    def _legendre_design_nb(ref, nz_dim, nz_deg, order):
        m, d = ref.shape
        k_terms, width = nz_dim.shape
        out = np.empty((m, k_terms))
        table = np.empty((d, order + 1))
        for i in range(m):
            for j in range(d):
                x = ref[i, j]
                table[j, 0] = 1.0
                if order >= 1:
                    table[j, 1] = x
                for k in range(2, order + 1):
                    table[j, k] = ((2 * k - 1) * x * table[j, k - 1] - (k - 1) * table[j, k - 2]) / k
            for k in range(k_terms):
                v = 1.0
                for t in range(width):
                    dd = nz_dim[k, t]
                    if dd < 0:
                        break
                    v *= table[dd, nz_deg[k, t]]
                out[i, k] = v
        return out

    @njit(cache=True, nogil=True)
    def _in_box_nb(points, lo, hi, tol):
        n, d = points.shape
        out = np.empty(n, dtype=np.bool_)
        for i in range(n):
            inside = True
            for j in range(d):
                x = points[i, j]
                if x < lo[j] - tol or x > hi[j] + tol:
                    inside = False
                    break
            out[i] = inside
        return out

    @njit(cache=True, nogil=True)
    def _locate_boxes_nb(points, lo, hi, closed):
        n, d = points.shape
        n_leaves = lo.shape[0]
        idx = np.full(n, -1, dtype=np.int64)
        for i in range(n):
            for leaf in range(n_leaves):
                inside = True
                for j in range(d):
                    x = points[i, j]
                    if x < lo[leaf, j]:
                        inside = False
                        break
                    if closed[leaf, j]:
                        if x > hi[leaf, j]:
                            inside = False
                            break
                    elif x >= hi[leaf, j]:
                        inside = False
                        break
                if inside:
                    idx[i] = leaf
                    break
        return idx

    def _wrap_design(ref, nz_dim, nz_deg, order):
        return _legendre_design_nb(
            np.ascontiguousarray(ref, dtype=np.float64),
            np.ascontiguousarray(nz_dim, dtype=np.int64),
            np.ascontiguousarray(nz_deg, dtype=np.int64),
            int(order),
        )

    def _wrap_in_box(points, lo, hi, tol):
        return _in_box_nb(
            np.ascontiguousarray(points, dtype=np.float64),
            np.ascontiguousarray(lo, dtype=np.float64),
            np.ascontiguousarray(hi, dtype=np.float64),
            float(tol),
        )

    def _wrap_locate(points, lo, hi, closed):
        return _locate_boxes_nb(
            np.ascontiguousarray(points, dtype=np.float64),
            np.ascontiguousarray(lo, dtype=np.float64),
            np.ascontiguousarray(hi, dtype=np.float64),
            np.ascontiguousarray(closed, dtype=np.bool_),
        )

    numba_kernels = types.SimpleNamespace(
        legendre_design=_wrap_design,
        in_box=_wrap_in_box,
        locate_boxes=_wrap_locate,
    )


def _numba_disabled():
    return os.environ.get("SCAMR_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


if numba_kernels is not None and not _numba_disabled():
    BACKEND = "numba"
    _active = numba_kernels
else:
    BACKEND = "numpy"
    _active = numpy_kernels

legendre_design = _active.legendre_design
in_box = _active.in_box
locate_boxes = _active.locate_boxes
