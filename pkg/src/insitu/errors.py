"""Exception types raised by the library."""


class InsituError(Exception):
    """Base class for all errors raised by :mod:`insitu`."""


class SizeError(InsituError, ValueError):
    """A size argument is outside the supported range."""


class DomainError(InsituError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ValidationError(InsituError, ValueError):
    """Input data failed validation before any work was done."""


class PrecisionError(InsituError, ArithmeticError):
    """A numerical procedure could not reach the requested accuracy."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class DependencyError(InsituError, LookupError):
    """A precomputed table does not cover the requested range."""
