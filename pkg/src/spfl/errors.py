"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class InvalidState(ValueError):
    pass


class InvalidConfiguration(ValueError):
    pass


class NoSwitchingPossible(ValueError):
    """The loop has no dispersive imbalance, so every detuning routes the same way."""


class RootNotBracketed(ValueError):
    pass


class FitDegenerate(RuntimeError):
    pass


class MaxIterations(RuntimeError):
    """Raised by the fitter when it runs out of iterations.

    ``best`` holds the best parameters found so far and ``residual`` their cost.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
