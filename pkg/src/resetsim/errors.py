"""Exception types shared across the package."""


class ResetSimError(Exception):
    """Base class for package errors."""


class DomainError(ResetSimError, ValueError):
    """Input outside the mathematical domain of an operation."""


class UnsupportedKindError(ResetSimError, ValueError):
    """Operation not available for this spectral-density kind."""


class NumericalAccuracyError(ResetSimError, ArithmeticError):
    """A numerical routine could not reach its accuracy target.

    Carries the achieved error estimate in ``achieved``.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class BondLimitError(ResetSimError, RuntimeError):
    """Bond dimension exceeded the declared maximum during a build.

    Carries the step index at which growth exceeded the cap.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConvergenceError(ResetSimError, RuntimeError):
    """An iterative solver failed to converge; carries the last iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class ConfigError(ResetSimError, ValueError):
    """Invalid or incomplete run configuration."""
