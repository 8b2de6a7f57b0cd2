"""
scamr: adaptive stochastic collocation surrogates.

Legendre gPC fits on hyperbox elements, adaptive element refinement driven by
centerline and residual checks, and cut-HDMR dimension reduction for
high-dimensional uniform inputs.
"""

from ._kernels import BACKEND
from .bench import get_case, normalized_l2, relative_mean_error, rmse
from .cache import EvaluationCache
from .decomposition import Decomposition, assemble_decomposition, combined_eval
from .driver import (
    ScamrConfig,
    ScamrSurrogate,
    estimate_mean,
    evaluation_count,
    extract_value,
    run_scamr,
)
from .errors import (
    ConfigError,
    DegenerateDesignError,
    EvaluationError,
    InsufficientPointsError,
    OutOfDomainError,
    ScamrError,
)
from .gpc import GpcSurrogate, total_degree_indices
from .grids import Element, sparse_grid

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "Decomposition",
    "DegenerateDesignError",
    "Element",
    "EvaluationCache",
    "EvaluationError",
    "GpcSurrogate",
    "InsufficientPointsError",
    "OutOfDomainError",
    "ScamrConfig",
    "ScamrError",
    "ScamrSurrogate",
    "assemble_decomposition",
    "combined_eval",
    "estimate_mean",
    "evaluation_count",
    "extract_value",
    "get_case",
    "normalized_l2",
    "relative_mean_error",
    "rmse",
    "run_scamr",
    "sparse_grid",
    "total_degree_indices",
]
