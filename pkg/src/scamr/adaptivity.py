"""
Refinement and dimension-reduction criteria.

All checks take an element expressed in the coordinates of ``evaluator``
(a :class:`~scamr.cache.EvaluationCache` or a subspace view of one) and only
ever obtain model values through it.  Tolerances are absolute.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .gpc import (
    GpcSurrogate,
    design_matrix,
    fit_least_squares,
    residual_inf,
    total_degree_indices,
)
from .errors import DegenerateDesignError, InsufficientPointsError, ScamrError
from .grids import centerline_points, chebyshev_nodes_1d, element_grid, to_reference

CENTERLINE_LEVEL = 2


@dataclass
class CriterionOutcome:
    satisfied: bool
    error: float
    tolerance: float
    detail: object = None

    @classmethod
    def strict(cls, error, tol, detail=None):
        return cls(bool(error < tol), float(error), float(tol), detail)

    @classmethod
    def inclusive(cls, error, tol, detail=None):
        return cls(bool(error <= tol), float(error), float(tol), detail)


@dataclass
class CriticalRanking:
    """Failing dimensions by descending centerline error; ``errors`` covers every dimension."""

    entries: list = field(default_factory=list)
    errors: np.ndarray = None

    def __len__(self):
        return len(self.entries)

    def __bool__(self):
        return bool(self.entries)

    @property
    def dims(self):
        return [d for d, _ in self.entries]

    def top(self, k=2):
        """The ``k`` dimensions with the largest centerline error, failing or not."""
        order = sorted(range(len(self.errors)), key=lambda d: (-self.errors[d], d))
        return order[:k]


def _require_positive(tol, name):
    if not tol > 0:
        raise ValueError(f"{name} must be positive, got {tol}")


_QUAD_1D = total_degree_indices(1, 2)


def centerline_values(e, dim, evaluator):
    return evaluator.evaluate(centerline_points(e, dim, CENTERLINE_LEVEL))


def check_abrupt_variation(e, dim, evaluator, eps1):
    """Quadratic fit of the 5 centerline values along ``dim``; passes if its max residual < eps1."""
    _require_positive(eps1, "eps1")
    values = centerline_values(e, dim, evaluator)
    z = chebyshev_nodes_1d(CENTERLINE_LEVEL)[:, None]
    coeffs = fit_least_squares(_QUAD_1D, z, values)
    resid = np.abs(_centerline_design() @ coeffs - values)
    return CriterionOutcome.strict(resid.max(), eps1, resid)


@lru_cache(maxsize=1)
def _centerline_design():
    return design_matrix(_QUAD_1D, chebyshev_nodes_1d(CENTERLINE_LEVEL)[:, None])


def check_first_level_noninteraction(e, dim, evaluator, eps1):
    """Centerline values all within eps1 of the value at the element center."""
    _require_positive(eps1, "eps1")
    values = centerline_values(e, dim, evaluator)
    u_c = evaluator.evaluate(e.center[None, :])[0]
    dev = np.abs(values - u_c)
    return CriterionOutcome.strict(dev.max(), eps1, dev)


def pairwise_points(domain, i1, i2):
    """
    The four square points of an (i1, i2) interaction test and their axis
    projections through the domain center.

    Returns ``(corners, proj1, proj2)``, each of shape ``(4, n)``.
    """
    c = domain.center
    corners = np.tile(c, (4, 1))
    proj1 = np.tile(c, (4, 1))
    proj2 = np.tile(c, (4, 1))
    (a1, b1), (a2, b2) = domain.bounds[i1], domain.bounds[i2]
    for k, (x1, x2) in enumerate(((a1, a2), (b1, a2), (a1, b2), (b1, b2))):
        corners[k, i1], corners[k, i2] = x1, x2
        proj1[k, i1] = x1
        proj2[k, i2] = x2
    return corners, proj1, proj2


def check_pairwise_interaction(i1, i2, evaluator, domain, eps2):
    """
    Cut-HDMR second-order component at the four (i1, i2) face corners through
    the domain center; the pair is non-interacting if its max |.| <= eps2.
    """
    _require_positive(eps2, "eps2")
    if i1 == i2:
        raise ValueError("pairwise check needs two distinct dimensions")
    corners, proj1, proj2 = pairwise_points(domain, i1, i2)
    g_true = evaluator.evaluate(corners)
    g1 = evaluator.evaluate(proj1)
    g2 = evaluator.evaluate(proj2)
    g0 = evaluator.evaluate(domain.center[None, :])[0]
    diff = np.abs(g_true - (g1 + g2 - g0))
    return CriterionOutcome.inclusive(diff.max(), eps2, diff)


def fit_points(e, evaluator, level):
    """Evaluate the element's sparse grid, then collect every cached point in the element."""
    evaluator.evaluate(element_grid(e, level))
    return evaluator.harvest(e.lo, e.hi)


def _fit(e, order, points, values):
    basis = total_degree_indices(e.dim, order)
    ref = to_reference(e, points, check=False)
    coeffs = fit_least_squares(basis, ref, values)
    return GpcSurrogate(basis, coeffs, np.array(e.bounds)), ref


def check_gpc_residual(e, order, evaluator, eps1, level=None):
    """
    Least-squares gPC of ``order`` on the element's sparse grid plus every
    previously evaluated point inside it; passes if the max residual < eps1.
    """
    _require_positive(eps1, "eps1")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    level = order if level is None else level
    points, values = fit_points(e, evaluator, level)
    try:
        surrogate, ref = _fit(e, order, points, values)
    except (InsufficientPointsError, DegenerateDesignError) as exc:
        raise ScamrError(f"element {e.id} {e.bounds}: {exc}") from exc
    resid = residual_inf(surrogate.basis, surrogate.coefficients, ref, values)
    return CriterionOutcome.strict(resid, eps1, {"points": len(values)}), surrogate


def fit_fallback(e, evaluator):
    """
    First-order fit for an element closed by a stopping rule, from the cached
    points it already holds, topping up with its level-1 grid when needed.
    """
    points, values = evaluator.harvest(e.lo, e.hi)
    if len(values) >= e.dim + 2:
        try:
            return _fit(e, 1, points, values)[0]
        except DegenerateDesignError:
            pass
    points, values = fit_points(e, evaluator, 1)
    return _fit(e, 1, points, values)[0]


def rank_critical_dimensions(e, evaluator, eps1):
    errors = np.empty(e.dim)
    for d in range(e.dim):
        errors[d] = check_abrupt_variation(e, d, evaluator, eps1).error
    failing = [d for d in range(e.dim) if not errors[d] < eps1]
    failing.sort(key=lambda d: (-errors[d], d))
    return CriticalRanking([(d, float(errors[d])) for d in failing], errors)


__all__ = [
    "CriterionOutcome",
    "CriticalRanking",
    "check_abrupt_variation",
    "check_first_level_noninteraction",
    "check_pairwise_interaction",
    "check_gpc_residual",
    "rank_critical_dimensions",
    "fit_fallback",
    "pairwise_points",
]
