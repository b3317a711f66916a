"""Exception types raised across the package."""


class IdentError(Exception):
    """Base class for all package errors."""


class StabilityError(IdentError, ValueError):
    """A denominator has a root on or outside the unit circle."""


class DegenerateSignalError(IdentError, ValueError):
    """A signal has zero variance where a nonzero one is required."""


class InvalidPoleError(IdentError, ValueError):
    """A basis pole lies on or outside the unit circle."""


class RealnessError(IdentError, ValueError):
    """A pole set cannot produce real time-domain basis functions."""


class DomainError(IdentError, ValueError):
    """A hyperparameter or argument is outside its admissible range."""


class IndefiniteKernelError(IdentError, ArithmeticError):
    """A kernel matrix could not be factored even with maximal jitter."""


class NumericalError(IdentError, ArithmeticError):
    """A computation produced a non-finite result or a solve failed."""


class TuningFailedError(IdentError, RuntimeError):
    """The hyperparameter objective was non-finite on the whole grid."""


class DataTooShortError(IdentError, ValueError):
    """Too few samples for the requested estimate."""


class EstimationError(IdentError, RuntimeError):
    """An estimation problem is degenerate (for example zero input)."""


class DataFormatError(IdentError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
