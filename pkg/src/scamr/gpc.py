"""
Legendre polynomial chaos on hyperboxes.

Multivariate basis functions are tensor products of 1-D Legendre polynomials
indexed by a total-degree multi-index set in graded lexicographic order.
Coefficients are normalised against the uniform probability density, so
E[P_k^2] = 1 / (2k + 1) and the constant coefficient is the mean.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import (
    DegenerateDesignError,
    DimensionMismatchError,
    InsufficientPointsError,
    OutOfDomainError,
    ScamrError,
)

RANK_TOL = 1e-10
_CLAMP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MultiIndexSet:
    """Total-degree multi-index set stored in sparse (dimension, degree) form."""

    dim: int
    order: int
    nz_dim: np.ndarray = field(repr=False)
    nz_deg: np.ndarray = field(repr=False)

    def __len__(self):
        return self.nz_dim.shape[0]

    @property
    def indices(self):
        """Dense ``(N+1, dim)`` integer array of multi-indices."""
        dense = np.zeros((len(self), self.dim), dtype=np.int64)
        for t in range(self.nz_dim.shape[1]):
            rows = np.nonzero(self.nz_dim[:, t] >= 0)[0]
            dense[rows, self.nz_dim[rows, t]] = self.nz_deg[rows, t]
        return dense

    def as_tuples(self):
        return [tuple(int(v) for v in row) for row in self.indices]

    def norms(self):
        """E[Phi_i^2] under the uniform probability density on [-1, 1]^dim."""
        deg = np.where(self.nz_dim >= 0, self.nz_deg, 0)
        return np.prod(1.0 / (2.0 * deg + 1.0), axis=1)

    def degrees(self):
        return np.where(self.nz_dim >= 0, self.nz_deg, 0).sum(axis=1)


@lru_cache(maxsize=64)
def total_degree_indices(n, p):
    """Complete total-degree set of ``n``-variate indices with degree <= ``p``."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if p < 0:
        raise ValueError(f"order must be >= 0, got {p}")
    size = comb(n + p, p)
    width = max(p, 1)
    nz_dim = np.full((size, width), -1, dtype=np.int64)
    nz_deg = np.zeros((size, width), dtype=np.int64)
    row = 1
    for degree in range(1, p + 1):
        # lexicographic multisets of dimensions <=> descending exponent vectors
        for dims in combinations_with_replacement(range(n), degree):
            uniq, counts = np.unique(dims, return_counts=True)
            nz_dim[row, : len(uniq)] = uniq
            nz_deg[row, : len(uniq)] = counts
            row += 1
    assert row == size
    nz_dim.setflags(write=False)
    nz_deg.setflags(write=False)
    return MultiIndexSet(n, p, nz_dim, nz_deg)


def legendre_eval(degree, x):
    """P_degree(x) by the three-term recurrence."""
    x = float(x)
    if abs(x) > 1.0 + _CLAMP_TOL:
        raise OutOfDomainError([x], "Legendre argument outside [-1, 1]")
    x = min(1.0, max(-1.0, x))
    p_prev, p = 1.0, x
    if degree == 0:
        return 1.0
    for k in range(2, degree + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    return p


def design_matrix(basis, ref_points):
    """Rows are basis_eval at each reference point."""
    ref_points = np.atleast_2d(np.asarray(ref_points, dtype=float))
    if ref_points.shape[1] != basis.dim:
        raise DimensionMismatchError(
            f"points have dimension {ref_points.shape[1]}, basis has {basis.dim}"
        )
    if np.any(np.abs(ref_points) > 1.0 + _CLAMP_TOL):
        bad = ref_points[np.any(np.abs(ref_points) > 1.0 + _CLAMP_TOL, axis=1)][0]
        raise OutOfDomainError(bad, "reference point outside [-1, 1]^n")
    return _kernels.legendre_design(
        np.clip(ref_points, -1.0, 1.0), basis.nz_dim, basis.nz_deg, basis.order
    )


def basis_eval(basis, point):
    point = np.asarray(point, dtype=float)
    if point.ndim != 1:
        raise DimensionMismatchError("basis_eval expects a single point")
    return design_matrix(basis, point[None, :])[0]


@dataclass(eq=False)
class GpcSurrogate:
    basis: MultiIndexSet
    coefficients: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        self.bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if self.coefficients.shape != (len(self.basis),):
            raise ScamrError(
                f"{self.coefficients.shape[0]} coefficients for a basis of {len(self.basis)}"
            )
        if self.bounds.shape != (self.basis.dim, 2) or np.any(self.bounds[:, 0] >= self.bounds[:, 1]):
            raise ScamrError(f"degenerate surrogate bounds {self.bounds.tolist()}")

    @property
    def dim(self):
        return self.basis.dim

    @property
    def order(self):
        return self.basis.order

    def to_reference(self, points):
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return -1.0 + 2.0 * (points - lo) / (hi - lo)

    def evaluate(self, points, check=True):
        """Vectorised evaluation at ``(Q, dim)`` points in original coordinates."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if check:
            lo, hi = self.bounds[:, 0], self.bounds[:, 1]
            tol = 1e-12 * np.maximum(1.0, np.abs(self.bounds).max(axis=1))
            outside = np.any((points < lo - tol) | (points > hi + tol), axis=1)
            if outside.any():
                raise OutOfDomainError(points[outside][0], "query outside surrogate bounds")
        ref = np.clip(self.to_reference(points), -1.0, 1.0)
        return design_matrix(self.basis, ref) @ self.coefficients

    def mean(self):
        return float(self.coefficients[0])

    def to_dict(self):
        return {
            "dim": self.dim,
            "order": self.order,
            "bounds": self.bounds.tolist(),
            "coefficients": self.coefficients.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        basis = total_degree_indices(int(data["dim"]), int(data["order"]))
        return cls(basis, np.array(data["coefficients"], dtype=float), np.array(data["bounds"], dtype=float))


def surrogate_eval(s, query):
    query = np.asarray(query, dtype=float)
    if query.ndim == 1:
        return float(s.evaluate(query[None, :])[0])
    return s.evaluate(query)


def surrogate_mean(s):
    return s.mean()


def _check_values(values, n):
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape[0] != n:
        raise DimensionMismatchError(f"{values.shape[0]} values for {n} points")
    if not np.all(np.isfinite(values)):
        raise ScamrError("non-finite model values passed to a gPC fit")
    return values


def fit_discrete_projection(basis, nodes, weights, values):
    """
    Coefficients by quadrature: u_i = sum_j u(x_j) Phi_i(x_j) w_j / (2^n E[Phi_i^2]).

    ``weights`` integrate over [-1, 1]^n with Lebesgue measure (they sum to
    2^n); dividing by 2^n turns them into probability weights.
    """
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    weights = np.asarray(weights, dtype=float).reshape(-1)
    m = nodes.shape[0]
    if weights.shape[0] != m:
        raise DimensionMismatchError(f"{weights.shape[0]} weights for {m} nodes")
    if m < 1:
        raise InsufficientPointsError(m, 0)
    values = _check_values(values, m)
    # project the deviation from one sample value so constants come out exact
    shift = values[0]
    values = values - shift
    prob_weights = weights / 2.0 ** basis.dim
    coeffs = np.empty(len(basis))
    # row chunks keep the design matrix small for high-dimensional sets
    chunk = max(1, int(4e7 // max(1, len(basis))))
    acc = np.zeros(len(basis))
    for start in range(0, m, chunk):
        sl = slice(start, start + chunk)
        acc += (values[sl] * prob_weights[sl]) @ design_matrix(basis, nodes[sl])
    coeffs[:] = acc / basis.norms()
    coeffs[0] += shift
    return coeffs


def fit_least_squares(basis, points, values):
    """Unweighted least-squares coefficients via column-pivoted QR."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m = points.shape[0]
    n_terms = len(basis)
    if m <= n_terms:
        raise InsufficientPointsError(m, n_terms)
    values = _check_values(values, m)
    a = design_matrix(basis, points)
    q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > RANK_TOL * diag[0])) if diag[0] > 0 else 0
    if rank < n_terms:
        raise DegenerateDesignError(sorted(piv[rank:]), rank, n_terms)
    sol = scipy.linalg.solve_triangular(r, q.T @ values)
    coeffs = np.empty(n_terms)
    coeffs[piv] = sol
    return coeffs


def residual_inf(basis, coefficients, ref_points, values):
    """Max-norm of (expansion - values) at reference points."""
    approx = design_matrix(basis, ref_points) @ coefficients
    return float(np.max(np.abs(approx - values))) if len(values) else 0.0
