"""Exception types shared across the package."""


class BoxcarpetError(Exception):
    """Base class for all package errors."""


class DomainError(BoxcarpetError, ValueError):
    """An argument lies outside its physical or mathematical domain."""


class AccuracyError(BoxcarpetError, RuntimeError):
    """A numerical procedure failed to reach the requested accuracy.

    Attributes
    ----------
    value : float or complex
        Best available estimate of the quantity.
    error_estimate : float
        Achieved (not requested) absolute error estimate.
    """

    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class FitError(BoxcarpetError, RuntimeError):
    """Too few usable points, or otherwise unusable data, for a fit."""


class IntegrationError(BoxcarpetError, RuntimeError):
    """Adaptive trajectory integration failed (typically step underflow at a node).

    Carries the partial path up to the failure time so callers can inspect
    where the trajectory ran into trouble.
    """

    def __init__(self, message, failure_time=None, failure_position=None,
                 partial_times=None, partial_positions=None):
        super().__init__(message)
        self.failure_time = failure_time
        self.failure_position = failure_position
        self.partial_times = partial_times
        self.partial_positions = partial_positions
