"""
Benchmark cases, error metrics and reference oracles.

Every case exposes a vectorised ``batch(X)`` over ``(M, n)`` points and a
scalar ``__call__`` so it can serve directly as a black-box model.

Cases f10-f12 and f14 switch to zero in one quadrant.  By default the zero
branch is taken when x1 > 0.5 or x2 > 0.5; ``closed_branch=True`` uses
x1 >= 0.5 or x2 >= 0.5 instead.  With the closed branch every level-1 sparse
grid node of [0, 1]^n lands on the zero branch and the global first-order
check accepts the zero function.
"""

import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
from scipy.stats import qmc

from .errors import ConfigError, OutOfDomainError, ScamrError
from .grids import Element

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)


@dataclass
class EllipticSolverSpec:
    resolution: int = 64
    observation: tuple = (0.5, 0.5)
    correlation_length: float = 0.5

    def __post_init__(self):
        if self.resolution < 16:
            raise ConfigError(f"elliptic grid resolution must be >= 16, got {self.resolution}")
        if self.resolution % 2:
            raise ConfigError("elliptic grid resolution must be even so (0.5, 0.5) is a node")
        if tuple(self.observation) != (0.5, 0.5):
            raise ConfigError("only the (0.5, 0.5) observation point is supported")


@dataclass
class BenchmarkCase:
    id: str
    dim: int
    domain: Element
    func: object = field(repr=False)
    params: dict = field(default_factory=dict)
    exact_mean: float = None

    def batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"{self.id} expects {self.dim} coordinates, got {X.shape[1]}")
        inside = self.domain.contains_closed(X)
        if not np.all(inside):
            raise OutOfDomainError(X[~inside][0], f"point outside the {self.id} domain")
        return self.func(X)

    def __call__(self, x):
        return float(self.batch(np.asarray(x, dtype=float)[None, :])[0])

    def sample(self, count, seed):
        rng = np.random.default_rng(seed)
        return self.domain.lo + rng.random((count, self.dim)) * self.domain.widths


def _unit(n):
    return Element.box(np.zeros(n), np.ones(n))


def _zero_quadrant(X, closed):
    if closed:
        return (X[:, 0] >= 0.5) | (X[:, 1] >= 0.5)
    return (X[:, 0] > 0.5) | (X[:, 1] > 0.5)


def _line_singularity(X):
    return 1.0 / (np.abs(0.3 - X[:, 0] ** 2 - X[:, 1] ** 2) + 0.1)


def _kink(X, closed):
    v = np.sin(np.pi * X[:, 0]) * np.sin(np.pi * X[:, 1])
    return np.where(_zero_quadrant(X, closed), 0.0, v)


def f13_weights(n=10, sigma=2.0):
    return sigma * 0.1 / 2.0 ** np.arange(n)


def f14_coefficients(n):
    i = np.arange(1, n + 1)
    return np.exp(-35.0 * i / (n - 1))


def analytic_mean_f14(n):
    """Mean of f14 over [0, 1]^n."""
    if n < 2:
        raise ValueError("f14 needs n >= 2")
    c = f14_coefficients(n)
    upper = np.ones(n)
    upper[:2] = 0.5
    # (e^{cu} - 1) / c without cancellation for tiny c
    factors = np.where(c * upper > 1e-300, np.expm1(c * upper) / c, upper)
    return float(np.prod(factors))


_S4 = (1.0 - math.cos(4.0)) / 4.0


def _make_case(case_id, dim, closed_branch, sigma, solver):
    cb = closed_branch
    if case_id == "f1":
        return _unit(2), lambda X: X[:, 0] ** 2 + X[:, 1] ** 2, 2.0 / 3.0, 2
    if case_id == "f2":
        return _unit(2), lambda X: np.sin(4 * X[:, 0]) * np.sin(4 * X[:, 1]), _S4**2, 2
    if case_id == "f3":
        return _unit(4), lambda X: np.sum(X**2, axis=1), 4.0 / 3.0, 4
    if case_id == "f4":
        return _unit(4), lambda X: np.sum(np.sin(4 * X), axis=1), 4 * _S4, 4
    if case_id == "f5":
        return (
            _unit(4),
            lambda X: np.sin(4 * X[:, 0]) * np.sin(4 * X[:, 1]) + np.sin(4 * X[:, 2]) * np.sin(4 * X[:, 3]),
            2 * _S4**2,
            4,
        )
    if case_id == "f6":
        return _unit(10), lambda X: np.sum(np.sin(4 * X), axis=1), 10 * _S4, 10
    if case_id == "f7":
        return _unit(2), _line_singularity, None, 2
    if case_id == "f8":
        return _unit(4), lambda X: _line_singularity(X) + X[:, 2:].sum(axis=1), None, 4
    if case_id == "f9":
        return _unit(10), lambda X: _line_singularity(X) + X[:, 2:].sum(axis=1), None, 10
    if case_id == "f10":
        return _unit(2), lambda X: _kink(X, cb), 1.0 / math.pi**2, 2
    if case_id == "f11":
        return _unit(4), lambda X: _kink(X, cb) + X[:, 2:].sum(axis=1), 1.0 / math.pi**2 + 1.0, 4
    if case_id == "f12":
        return _unit(10), lambda X: _kink(X, cb) + X[:, 2:].sum(axis=1), 1.0 / math.pi**2 + 4.0, 10
    if case_id == "f13":
        n = 10 if dim is None else dim
        w = f13_weights(n, sigma)
        dom = Element.box(np.full(n, -SQRT3), np.full(n, SQRT3))
        return dom, lambda X: 1.0 / (1.0 + X @ w), None, n
    if case_id == "f14":
        n = 100 if dim is None else dim
        c = f14_coefficients(n)

        def f14(X):
            return np.where(_zero_quadrant(X, cb), 0.0, np.exp(X @ c))

        return _unit(n), f14, analytic_mean_f14(n), n
    if case_id == "elliptic":
        n = 25 if dim is None else dim
        dom = Element.box(np.full(n, -SQRT3), np.full(n, SQRT3))
        spec = solver or EllipticSolverSpec()

        def elliptic(X):
            return np.array([solve_elliptic(y, spec) for y in X])

        return dom, elliptic, None, n
    raise ConfigError(f"unknown benchmark case {case_id!r}")


CASE_IDS = tuple(f"f{i}" for i in range(1, 15)) + ("elliptic",)
_FIXED_DIMS = {"f1": 2, "f2": 2, "f3": 4, "f4": 4, "f5": 4, "f6": 10, "f7": 2, "f8": 4,
               "f9": 10, "f10": 2, "f11": 4, "f12": 10}


def get_case(case_id, dim=None, closed_branch=False, sigma=2.0, solver=None):
    """
    Look up a case by id: ``"f1"`` .. ``"f14"``, ``"elliptic"``, or with a
    dimension suffix such as ``"f14-n200"`` / ``"elliptic-n50"``.
    """
    m = re.fullmatch(r"(f\d+|elliptic)(?:-n(\d+))?", str(case_id))
    if not m:
        raise ConfigError(f"unknown benchmark case {case_id!r}")
    base = m.group(1)
    if m.group(2) is not None:
        suffix = int(m.group(2))
        if dim is not None and dim != suffix:
            raise ConfigError(f"{case_id} conflicts with dim={dim}")
        dim = suffix
    if base in _FIXED_DIMS and dim is not None and dim != _FIXED_DIMS[base]:
        raise ConfigError(f"{base} is defined for n={_FIXED_DIMS[base]} only")
    if base == "f14" and dim is not None and dim < 2:
        raise ConfigError("f14 needs n >= 2")
    if base == "elliptic" and dim is not None and dim < 2:
        raise ConfigError("elliptic needs n >= 2")
    domain, func, mean, n = _make_case(base, dim, closed_branch, sigma, solver)
    params = {}
    if base in ("f10", "f11", "f12", "f14"):
        params["closed_branch"] = bool(closed_branch)
    if base == "f13":
        params["sigma"] = sigma
    if base == "elliptic":
        params["resolution"] = (solver or EllipticSolverSpec()).resolution
    label = base if base in _FIXED_DIMS else f"{base}-n{n}"
    return BenchmarkCase(label, n, domain, func, params, mean)


def eval_case(case, x):
    """Exact value(s) of a case at one point or at each row of ``(M, n)`` points."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return case(x)
    return case.batch(x)


# ----------------------------------------------------------------------------
# stochastic elliptic problem
# ----------------------------------------------------------------------------

def diffusion_log_terms(n, x, correlation_length=0.5):
    """
    ``(len(x), n)`` matrix B with log(a(x) - 0.5) = 1 + B @ Y.
    """
    x = np.asarray(x, dtype=float)
    lp = max(1.0, 2.0 * correlation_length)
    L = correlation_length / lp
    B = np.empty((len(x), n))
    B[:, 0] = math.sqrt(math.sqrt(math.pi) * L / 2.0)
    for i in range(2, n + 1):
        k = i // 2
        xi = math.sqrt(math.sqrt(math.pi) * L) * math.exp(-((k * math.pi * L) ** 2) / 8.0)
        phi = np.sin(k * math.pi * x / lp) if i % 2 == 0 else np.cos(k * math.pi * x / lp)
        B[:, i - 1] = xi * phi
    return B


def diffusion_coefficient(y, x, correlation_length=0.5):
    y = np.asarray(y, dtype=float)
    B = diffusion_log_terms(len(y), x, correlation_length)
    return 0.5 + np.exp(1.0 + B @ y)


def solve_diffusion(a_nodes, resolution, rhs=None):
    """
    Solve -(a(x) u_x)_x - a(x) u_yy = f on [0, 1]^2 with u = 0 on the boundary.

    ``a_nodes`` holds a at the ``resolution + 1`` grid abscissae.  Face
    coefficients in x are harmonic means of the neighbouring nodes.  Returns
    the full ``(resolution + 1, resolution + 1)`` nodal solution indexed
    ``[i_x, i_y]``.
    """
    N = int(resolution)
    a = np.asarray(a_nodes, dtype=float)
    if a.shape != (N + 1,):
        raise ValueError(f"need {N + 1} coefficient values, got {a.shape}")
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise ScamrError("diffusion coefficient must be positive and finite")
    h = 1.0 / N
    m = N - 1
    face = 2.0 * a[:-1] * a[1:] / (a[:-1] + a[1:])
    ai = a[1:-1]
    # x operator for the interior nodes
    main = (face[:-1] + face[1:]) / h**2
    off = -face[1:-1] / h**2
    Dx = scipy.sparse.diags([off, main, off], [-1, 0, 1], shape=(m, m))
    T = scipy.sparse.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1], shape=(m, m)) / h**2
    # unknown ordering: i_x fastest within each y row
    A = scipy.sparse.kron(scipy.sparse.identity(m), Dx) + scipy.sparse.kron(T, scipy.sparse.diags(ai))
    g = np.linspace(0.0, 1.0, N + 1)
    if rhs is None:
        F = np.outer(np.cos(g[1:-1]), np.sin(g[1:-1]))
    else:
        F = np.asarray(rhs(g[1:-1, None], g[None, 1:-1]), dtype=float)
    sol = scipy.sparse.linalg.spsolve(A.tocsc(), F.T.reshape(-1))
    if not np.all(np.isfinite(sol)):
        raise ScamrError("elliptic solve produced non-finite values")
    U = np.zeros((N + 1, N + 1))
    U[1:-1, 1:-1] = sol.reshape(m, m).T
    return U


def solve_elliptic(sample, spec=None):
    """u(0.5, 0.5) for one random-input sample Y."""
    spec = spec or EllipticSolverSpec()
    y = np.asarray(sample, dtype=float)
    if y.ndim != 1 or len(y) < 2:
        raise ValueError("elliptic sample needs n >= 2 components")
    if np.any(np.abs(y) > SQRT3 * (1 + 1e-12)):
        raise OutOfDomainError(y, "elliptic sample outside [-sqrt(3), sqrt(3)]^n")
    x = np.linspace(0.0, 1.0, spec.resolution + 1)
    a = diffusion_coefficient(y, x, spec.correlation_length)
    if not np.all(a > 0.5):
        raise ScamrError("diffusion coefficient must exceed 0.5")
    U = solve_diffusion(a, spec.resolution)
    mid = spec.resolution // 2
    return float(U[mid, mid])


# ----------------------------------------------------------------------------
# metrics and oracles
# ----------------------------------------------------------------------------

def _pair(exact, approx):
    exact = np.asarray(exact, dtype=float).reshape(-1)
    approx = np.asarray(approx, dtype=float).reshape(-1)
    if exact.shape != approx.shape:
        raise ValueError(f"length mismatch: {exact.shape[0]} vs {approx.shape[0]}")
    if exact.size == 0:
        raise ValueError("empty input")
    return exact, approx


def rmse(exact, approx):
    exact, approx = _pair(exact, approx)
    return float(np.sqrt(np.mean((exact - approx) ** 2)))


def normalized_l2(exact, approx):
    exact, approx = _pair(exact, approx)
    denom = np.linalg.norm(exact)
    if denom == 0:
        raise ZeroDivisionError("exact values are identically zero")
    return float(np.linalg.norm(exact - approx) / denom)


def relative_mean_error(i_exact, i_approx):
    if i_exact == 0:
        raise ZeroDivisionError("exact mean is zero")
    return abs(i_exact - i_approx) / abs(i_exact)


def mc_reference(case, sample_count, seed, chunk=100_000):
    """Plain Monte Carlo mean and standard error of a case."""
    if sample_count < 1000:
        raise ValueError("mc_reference needs at least 1000 samples")
    rng = np.random.default_rng(seed)
    s1 = s2 = 0.0
    done = 0
    while done < sample_count:
        m = min(chunk, sample_count - done)
        X = case.domain.lo + rng.random((m, case.dim)) * case.domain.widths
        v = case.batch(X)
        s1 += v.sum()
        s2 += (v * v).sum()
        done += m
    mean = s1 / sample_count
    var = max(s2 / sample_count - mean * mean, 0.0) * sample_count / (sample_count - 1)
    return float(mean), float(math.sqrt(var / sample_count))


def qmc_mean(case, log2_points, seed=0, chunk_log2=16):
    """Scrambled Sobol estimate of a case mean over ``2**log2_points`` points."""
    sampler = qmc.Sobol(case.dim, scramble=True, seed=seed)
    total = 0.0
    remaining = 2**log2_points
    step = 2 ** min(chunk_log2, log2_points)
    while remaining:
        U = sampler.random(step)
        total += case.batch(case.domain.lo + U * case.domain.widths).sum()
        remaining -= step
    return float(total / 2**log2_points)


__all__ = [
    "BenchmarkCase",
    "EllipticSolverSpec",
    "CASE_IDS",
    "get_case",
    "eval_case",
    "analytic_mean_f14",
    "f13_weights",
    "f14_coefficients",
    "diffusion_coefficient",
    "solve_diffusion",
    "solve_elliptic",
    "rmse",
    "normalized_l2",
    "relative_mean_error",
    "mc_reference",
    "qmc_mean",
]
