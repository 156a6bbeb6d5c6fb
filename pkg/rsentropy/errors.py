"""
Exception and warning types raised by rsentropy.

All errors derive from ValueError so callers that already guard numeric
input with ``except ValueError`` keep working.
"""

from typing import Optional, Sequence


class RSEntropyError(ValueError):
    """Base class for every error raised by the library."""


class ParameterError(RSEntropyError):
    """An argument is outside its valid range (k < 1, gamma <= 0, m = 1 for CV, ...)."""


class SizeError(RSEntropyError):
    """A finite population is too small for the requested draw."""


class DomainError(RSEntropyError):
    """A value lies outside the mathematical domain of an operation."""


class IngestionError(RSEntropyError):
    """Input data could not be loaded (missing column, malformed CSV, non-numeric cell)."""


class ConfigurationError(RSEntropyError):
    """A configuration table or solver could not produce a usable setting.

    Args:
        message: Human readable description
        residuals: Optional constraint residuals reported by a solver
    """

    def __init__(self, message: str, residuals: Optional[Sequence[float]] = None):
        if residuals is not None:
            message = f"{message} (residuals: {', '.join(f'{r:.3e}' for r in residuals)})"
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else None


class EvaluationError(RSEntropyError):
    """A density estimate vanished where a logarithm was required.

    Args:
        message: Human readable description
        point_count: Number of evaluation points where the density was zero
    """

    def __init__(self, message: str, point_count: int = 0):
        super().__init__(f"{message} ({point_count} point(s))")
        self.point_count = point_count


class NumericalError(RSEntropyError):
    """Quadrature or an approximation formula failed to produce a usable value.

    Args:
        message: Human readable description
        residual: Last observed residual, if any
    """

    def __init__(self, message: str, residual: Optional[float] = None):
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class RSEntropyWarning(UserWarning):
    """Non-fatal numerical anomaly (clamped estimate, tolerated replication failure)."""
