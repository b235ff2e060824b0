"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or unusable input data (bad shapes, missing columns, collinear controls)."""


class DegenerateError(ArithmeticError):
    """A numerical quantity needed by a test is degenerate (zero variance, unit leverage, ...)."""
