"""Exception types shared across the package."""


class SpahdError(Exception):
    """Base class for all package errors."""


class DimensionError(SpahdError, ValueError):
    """Inputs with incompatible or invalid shapes."""


class ModelDomainError(SpahdError, ValueError):
    """Model parameters outside the admissible domain (e.g. sigma not SPD)."""


class PhaseBranchError(SpahdError, ArithmeticError):
    """Complex log left the principal branch, or hit a zero of cosh."""


class NonconvergenceError(SpahdError, RuntimeError):
    """Iterative solver exhausted its budget.

    Carries the last residual so callers can decide whether the partial
    answer is usable.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class QuadratureError(SpahdError, ArithmeticError):
    """Quadrature refinement disagreement above tolerance."""


class AssumptionViolationError(SpahdError):
    """Integrability or phase assumption failed where it was required."""


class StandardizationError(SpahdError, ValueError):
    """Operation requires a standardized model (unit second moment)."""


class FitError(SpahdError, ValueError):
    """Slope fit refused: too few points or degenerate x-range."""


class ConfigError(SpahdError, ValueError):
    """Malformed model or experiment specification file."""
