"""
Exception types shared across tacfit.
"""

from typing import Optional


class TacfitError(Exception):
    """Base class for all tacfit errors."""
    pass


class DimensionError(TacfitError, ValueError):
    """Raised when matrix shapes do not line up."""
    pass


class DomainError(TacfitError, ValueError):
    """Raised when an argument lies outside the admissible domain."""
    pass


class IdentifiabilityError(TacfitError):
    """
    Raised when the Gamma matrix is singular or too ill-conditioned to invert.

    Attributes:
        condition_number: 2-norm condition number of the offending matrix (inf if singular)
    """

    def __init__(self, message: str, condition_number: float = float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class ConvergenceError(TacfitError):
    """Raised by the generic estimating-equation solver when Newton iteration fails."""

    def __init__(self, message: str, iterations: int = 0, score_norm: Optional[float] = None):
        super().__init__(message)
        self.iterations = iterations
        self.score_norm = score_norm


class MonteCarloAbort(TacfitError):
    """Raised when too many Monte-Carlo replicates fail."""

    def __init__(self, message: str, failures: int, replicates: int):
        super().__init__(message)
        self.failures = failures
        self.replicates = replicates


class SessionLoadError(TacfitError):
    """Raised when a TAC or BrAC table cannot be loaded."""
    pass
