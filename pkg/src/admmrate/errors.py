"""Exception types shared across the package."""


class AdmmRateError(Exception):
    """Base class for all errors raised by this package."""


class NotSymmetricError(AdmmRateError):
    """A matrix required to be symmetric is asymmetric beyond tolerance."""


class NoConvergenceError(AdmmRateError):
    """An iterative solver exhausted its budget without converging."""


class NotConnectedError(AdmmRateError):
    """A generated graph could not be made connected within the retry budget."""


class InvalidTopologyError(AdmmRateError):
    """A component structure does not fit the requested algorithm."""


class NonConvexError(AdmmRateError):
    """A scalar oracle reported a negative second derivative."""


class AssumptionViolatedError(AdmmRateError):
    """The aggregate Hessian at the minimizer is not positive definite."""


class SingularSystemError(AdmmRateError):
    """The penalized curvature system could not be factorized."""


class InconsistentRateError(AdmmRateError):
    """Two independent computations of the same quantity disagree."""


class ConfigError(AdmmRateError):
    """An experiment configuration is malformed or incomplete."""
