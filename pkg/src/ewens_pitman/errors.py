"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function or model."""


class AccuracyError(ArithmeticError):
    """A numerical routine could not reach its requested accuracy.

    The best available estimate is kept on ``best_estimate`` so callers can
    decide whether it is good enough for their purpose.
    """

    def __init__(self, message, best_estimate=None, error_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


class StateError(RuntimeError):
    """A sampler or martingale state is inconsistent with the requested move."""


class ResourceError(RuntimeError):
    """The request would exceed a hard size limit (e.g. brute-force enumeration)."""


class ConfigurationError(ValueError):
    """An experiment configuration cannot produce a meaningful result."""


class CancellationWarning(RuntimeWarning):
    """A signed sum lost most of its significant digits to cancellation."""
