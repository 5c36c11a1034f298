"""Exception types shared across the package."""


class CnmfError(Exception):
    """Base class for all package-specific errors."""


class ParseError(CnmfError):
    """A matrix file could not be parsed. The message names the offending
    byte or row offset."""


class ArgumentError(CnmfError, ValueError):
    """Invalid argument (shape mismatch, zero dimension, bad enum value)."""


class InfeasibleRankError(ArgumentError):
    """Requested rank cannot be accommodated by the matrix dimensions."""


class NumericError(CnmfError):
    """A non-finite value appeared mid-computation. The message names the
    pass in which it was detected."""


class BudgetError(CnmfError):
    """An operation cannot run within the configured memory budget."""


class ConvergenceError(CnmfError):
    """An iterative solve hit its iteration cap. ``best`` carries the best
    iterate found so far."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DivergenceError(CnmfError):
    """An iterative solve is diverging. ``trace`` carries the residual
    history up to detection."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class RankDeficiencyError(CnmfError):
    """Column selection ran out of numerically independent columns.
    ``picks`` carries the indices selected before the failure."""

    def __init__(self, message, picks=None):
        super().__init__(message)
        self.picks = list(picks) if picks is not None else []


class UndefinedMetricError(CnmfError):
    """A relative metric was requested against a zero-norm reference."""
