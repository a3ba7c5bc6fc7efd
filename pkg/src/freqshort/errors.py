"""Exception hierarchy shared across the library."""


class FreqshortError(Exception):
    """Base class for all library-specific failures."""


class ConfigurationError(FreqshortError):
    """Invalid configuration: bad schedules, mismatched dimensions, bad flags."""


class DataError(FreqshortError):
    """Invalid or unreadable input data (images, datasets, serialized files)."""


class SamplingError(ConfigurationError):
    """A patch sample cannot reach its area target (degenerate parent or bad p)."""


class RemoteEndpointError(FreqshortError):
    """Remote inference transport failure. Safe to retry unless noted."""

    def __init__(self, message: str, *, retryable: bool = True):
        super().__init__(message)
        self.retryable = retryable
