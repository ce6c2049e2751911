class InvariantError(RuntimeError):
    """A structural guarantee was violated; indicates a bug, not bad input."""


class UnsupportedSizeError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class BoundViolation(AssertionError):
    """A proven bound failed on a concrete permutation."""

    def __init__(self, message: str, sigma=None):
        super().__init__(message)
        self.sigma = sigma
