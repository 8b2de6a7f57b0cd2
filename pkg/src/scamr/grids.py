"""
Clenshaw-Curtis rules, Smolyak sparse grids of depth 1 and 2, and
hyperbox elements with their reference maps and bisection.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .errors import ConfigError, OutOfDomainError


@lru_cache(maxsize=8)
def _nodes(level):
    if level == 0:
        return np.zeros(1)
    m = 2**level + 1
    x = -np.cos(np.pi * np.arange(m) / (m - 1))
    x[m // 2] = 0.0
    x = 0.5 * (x - x[::-1])
    x[0], x[-1] = -1.0, 1.0
    x.setflags(write=False)
    return x


def chebyshev_nodes_1d(level):
    """Chebyshev-Gauss-Lobatto abscissae of a depth level, ascending (1 point at level 0)."""
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    return _nodes(level).copy()


@lru_cache(maxsize=8)
def _weights(level):
    if level == 0:
        w = np.array([2.0])
    else:
        n = 2**level
        j = np.arange(n + 1)
        w = np.ones(n + 1)
        for k in range(1, n // 2 + 1):
            b = 1.0 if k == n // 2 else 2.0
            w -= b / (4 * k * k - 1) * np.cos(2 * k * j * np.pi / n)
        c = np.full(n + 1, 2.0)
        c[0] = c[-1] = 1.0
        w *= c / n
        w = 0.5 * (w + w[::-1])
    w.setflags(write=False)
    return w


def clenshaw_curtis_weights_1d(level):
    """Clenshaw-Curtis weights on [-1, 1] matching ``chebyshev_nodes_1d(level)``."""
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    return _weights(level).copy()


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.nodes.shape[0]

    @property
    def dim(self):
        return self.nodes.shape[1]


def _sparse_terms(n, level):
    """
    Smolyak combination terms as {sparse node key: probability weight}.

    A key is a sorted tuple of (dimension, index into the level-2 node list)
    for the non-central coordinates.
    """
    x2 = _nodes(2)
    # position of each level's nodes inside the level-2 list
    pos = {0: [2], 1: [0, 2, 4], 2: [0, 1, 2, 3, 4]}
    center = 2
    acc = {}

    def add(levels, coef):
        # levels: tuple of (dim, level>0)
        grids = [
            [(d, p, w / 2.0) for p, w in zip(pos[lv], _weights(lv))] for d, lv in levels
        ]
        w0 = coef
        stack = [((), w0)]
        for g in grids:
            stack = [(key + ((d, p),), w * wp) for key, w in stack for d, p, wp in g]
        for key, w in stack:
            key = tuple(kp for kp in key if kp[1] != center)
            acc[key] = acc.get(key, 0.0) + w

    for total in range(max(0, level - n + 1), level + 1):
        coef = (-1) ** (level - total) * comb(n - 1, level - total)
        if coef == 0:
            continue
        if total == 0:
            add((), coef)
        elif total == 1:
            for d in range(n):
                add(((d, 1),), coef)
        else:
            for d in range(n):
                add(((d, 2),), coef)
            for d1, d2 in combinations(range(n), 2):
                add(((d1, 1), (d2, 1)), coef)
    keys = sorted(acc, key=lambda k: (len(k), k))
    return keys, np.array([acc[k] for k in keys]), x2


def sparse_grid_keys(n, level):
    """Sparse node keys only; cheap enough to count nodes for large ``n``."""
    keys, _, _ = _sparse_terms(n, level)
    return keys


@lru_cache(maxsize=32)
def _sparse_grid_cached(n, level):
    keys, prob_w, x2 = _sparse_terms(n, level)
    nodes = np.zeros((len(keys), n))
    for row, key in enumerate(keys):
        for d, p in key:
            nodes[row, d] = x2[p]
    nodes.setflags(write=False)
    weights = prob_w * 2.0**n
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights)


def sparse_grid(n, level):
    """Clenshaw-Curtis Smolyak rule on [-1, 1]^n; weights sum to 2^n."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if level not in (1, 2):
        raise ConfigError(f"unsupported sparse grid level {level}")
    return _sparse_grid_cached(n, level)


def sparse_grid_size(n, level):
    if level == 1:
        return 2 * n + 1
    if level == 2:
        return 2 * n * n + 2 * n + 1
    raise ConfigError(f"unsupported sparse grid level {level}")


@dataclass(frozen=True)
class Element:
    """
    Axis-aligned box [lo, hi) with a closed upper face wherever ``closed_top``
    is set (faces shared with the top of the global domain).
    """

    bounds: tuple
    id: int = 0
    parent: int | None = None
    depth: int = 0
    closed_top: tuple | None = None

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in np.atleast_2d(np.asarray(self.bounds, dtype=float)))
        if not b or any(not lo < hi for lo, hi in b):
            raise ValueError(f"degenerate element bounds {b}")
        object.__setattr__(self, "bounds", b)
        ct = self.closed_top
        ct = (True,) * len(b) if ct is None else tuple(bool(c) for c in ct)
        object.__setattr__(self, "closed_top", ct)

    @classmethod
    def box(cls, lo, hi, **kw):
        return cls(tuple(zip(np.broadcast_to(lo, np.shape(hi)), hi)), **kw)

    @property
    def dim(self):
        return len(self.bounds)

    @property
    def lo(self):
        return np.array([b[0] for b in self.bounds])

    @property
    def hi(self):
        return np.array([b[1] for b in self.bounds])

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def widths(self):
        return self.hi - self.lo

    def volume(self):
        return float(np.prod(self.widths))

    def contains(self, points, tol=0.0):
        points = np.atleast_2d(points)
        lo, hi = self.lo, self.hi
        upper = np.where(self.closed_top, points <= hi + tol, points < hi - tol)
        return np.all((points >= lo - tol) & upper, axis=1)

    def contains_closed(self, points, tol=1e-12):
        points = np.atleast_2d(points)
        scale = tol * np.maximum(1.0, np.abs(np.array(self.bounds)).max(axis=1))
        return np.all((points >= self.lo - scale) & (points <= self.hi + scale), axis=1)

    def to_dict(self):
        return {"id": self.id, "parent": self.parent, "bounds": [list(b) for b in self.bounds]}


def to_reference(e, point, reverse=False, check=True):
    """
    Affine map of original coordinates into [-1, 1]^n (``reverse=True``
    maps reference points back into the element).
    """
    point = np.asarray(point, dtype=float)
    lo, hi = e.lo, e.hi
    if reverse:
        return lo + 0.5 * (point + 1.0) * (hi - lo)
    if check and not np.all(e.contains_closed(point)):
        bad = np.atleast_2d(point)[~e.contains_closed(point)][0]
        raise OutOfDomainError(bad, "point outside element")
    return -1.0 + 2.0 * (point - lo) / (hi - lo)


def from_reference(e, eta):
    return to_reference(e, eta, reverse=True)


def element_grid(e, level):
    """Sparse grid of a depth level mapped into the element."""
    return from_reference(e, sparse_grid(e.dim, level).nodes)


def centerline_points(e, dim, level=2):
    if not 0 <= dim < e.dim:
        raise ValueError(f"dimension index {dim} out of range for a {e.dim}-D element")
    z = chebyshev_nodes_1d(level)
    pts = np.tile(e.center, (len(z), 1))
    lo, hi = e.bounds[dim]
    pts[:, dim] = lo + 0.5 * (z + 1.0) * (hi - lo)
    pts[len(z) // 2, dim] = 0.5 * (lo + hi)
    return pts


def subdivide(e, dims, ids):
    """
    Bisect ``e`` at the midpoint of each listed dimension (1 or 2 of them).

    ``ids`` is an iterator handing out fresh element ids in creation order.
    """
    dims = list(dict.fromkeys(int(d) for d in dims))
    if not dims:
        raise ValueError("subdivide needs at least one dimension")
    if len(dims) > 2:
        raise ValueError("subdivide splits at most two dimensions")
    for d in dims:
        if not 0 <= d < e.dim:
            raise ValueError(f"dimension index {d} out of range")
    children = []
    for mask in range(2 ** len(dims)):
        bounds = list(e.bounds)
        closed = list(e.closed_top)
        for bit, d in enumerate(dims):
            lo, hi = bounds[d]
            mid = 0.5 * (lo + hi)
            if mask >> bit & 1:
                bounds[d] = (mid, hi)
            else:
                bounds[d] = (lo, mid)
                closed[d] = False
        children.append(Element(tuple(bounds), next(ids), e.id, e.depth + 1, tuple(closed)))
    return children


def hypervolume_fraction(e, root):
    return float(np.prod(e.widths / root.widths))
