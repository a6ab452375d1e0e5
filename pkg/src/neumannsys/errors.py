"""Exception types shared across the package."""


class UsageError(ValueError):
    """Bad arguments: wrong lengths, empty lists, out-of-range sizes."""


class DomainError(ValueError):
    """Input outside the mathematical domain (non-finite values, a <= 0, ...)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite intermediates."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class SearchError(RuntimeError):
    """The threshold search could not produce a value."""
