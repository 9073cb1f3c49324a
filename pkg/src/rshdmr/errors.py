"""Exception types raised across the package."""


class InputError(ValueError):
    """Malformed or inconsistent input (shapes, missing markers, config fields)."""


class NumericalError(ArithmeticError):
    """A computation produced non-finite values."""


class ConditioningError(NumericalError):
    """Cholesky factorization failed even after the largest jitter was applied."""

    def __init__(self, message, jitter, cycle=None, component=None):
        super().__init__(message)
        self.jitter = jitter
        self.cycle = cycle
        self.component = component
