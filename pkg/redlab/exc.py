"""Custom exceptions for the redlab package."""


class RedlabError(Exception):
    """Root exception class for the redlab package."""


class Failure(RedlabError):
    """A failure in a worker process, e.g. one simulation replication."""

    def __init__(self, message, **kwargs):
        super().__init__(message)
        self.description = kwargs


class InvalidParameterError(RedlabError):
    """An invalid parameter, graph or configuration value."""


class SizeError(RedlabError):
    """A computation that would exceed its size guard."""


class UnstableSystemError(RedlabError):
    """A load at or beyond the stability region of a system."""


class InfeasibleError(RedlabError):
    """A design problem without any stable assignment."""
