"""Exception hierarchy shared by all modules."""


class CoulombGasError(Exception):
    """Base class for every error raised by the package."""


class SingularityError(CoulombGasError, ZeroDivisionError):
    """Kernel evaluated at zero distance (coincident points)."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class DomainError(CoulombGasError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class CapabilityError(CoulombGasError, NotImplementedError):
    """Requested combination is not supported by the closed forms."""


class ConsistencyError(CoulombGasError, ValueError):
    """Inputs are individually valid but mutually inconsistent."""


class NeutralityError(CoulombGasError, ValueError):
    """Periodic configuration is not charge neutral."""


class NumericToleranceError(CoulombGasError, ArithmeticError):
    """A numerical procedure did not reach its requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class InsufficientDataError(CoulombGasError, ValueError):
    """Too few (effective) samples for a meaningful estimate."""


class LaplaceRangeError(CoulombGasError, OverflowError):
    """Empirical exponential moment is numerically out of range."""


class ConfigError(CoulombGasError, ValueError):
    """Experiment configuration failed validation."""

    def __init__(self, message, key_path=None):
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)
        self.key_path = key_path
