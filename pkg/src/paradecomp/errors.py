"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid run or splitting configuration.

    ``index`` points at the offending weight (0-based) when one can be
    singled out; ``residual`` carries the weight-sum defect when relevant.
    """

    def __init__(self, message, index=None, residual=None):
        super().__init__(message)
        self.index = index
        self.residual = residual


class GridMismatchError(ValueError):
    """Two grid functions (or a function and its grid) do not line up."""


class SolveError(ArithmeticError):
    """A sub-problem solve produced non-finite values."""

    def __init__(self, message, part=None, step=None):
        super().__init__(message)
        self.part = part
        self.step = step


class OracleValidationError(ValueError):
    """Dense oracle input is not symmetric positive definite."""
