"""Exception hierarchy shared across the package.

CLI exit-code mapping: ConfigurationError / DomainError -> 2,
ConvergenceError / NumericError -> 3.
"""


class PricingError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(PricingError):
    """Inconsistent model/instance configuration (wrong shapes, bad modes)."""


class DomainError(PricingError):
    """An input value is outside the mathematical domain of an operation."""


class ConvergenceError(PricingError):
    """An iterative solver hit its iteration cap.

    Carries the best iterate found so far in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NumericError(PricingError):
    """A numeric procedure failed (bracketing, residual check, property check)."""
