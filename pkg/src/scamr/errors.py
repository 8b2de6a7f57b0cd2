"""Exception hierarchy shared by all scamr modules."""

import numpy as np


class ScamrError(Exception):
    """Base class for all errors raised by scamr."""


class ConfigError(ScamrError, ValueError):
    pass


class DimensionMismatchError(ScamrError, ValueError):
    pass


class OutOfDomainError(ScamrError, ValueError):
    def __init__(self, point, message="point lies outside the domain"):
        self.point = np.asarray(point, dtype=float).copy()
        super().__init__(f"{message}: {self.point.tolist()}")


class InsufficientPointsError(ScamrError, ValueError):
    def __init__(self, n_points, n_terms):
        self.n_points = n_points
        self.n_terms = n_terms
        super().__init__(
            f"least squares needs more than {n_terms} points, got {n_points}"
        )


class DegenerateDesignError(ScamrError, np.linalg.LinAlgError):
    """Design matrix is rank deficient; ``columns`` are the dependent basis columns."""

    def __init__(self, columns, rank, n_terms):
        self.columns = [int(c) for c in columns]
        self.rank = int(rank)
        super().__init__(
            f"design matrix has rank {rank} < {n_terms}; "
            f"dependent basis columns {self.columns}"
        )


class EvaluationError(ScamrError, RuntimeError):
    """The black-box model failed or returned a non-finite value."""

    def __init__(self, point, message="model evaluation failed", evaluations=None):
        self.point = np.asarray(point, dtype=float).copy()
        self.evaluations = evaluations
        super().__init__(f"{message} at {self.point.tolist()}")


class MissingSubproblemError(ScamrError, KeyError):
    pass
