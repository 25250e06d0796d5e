"""Exception hierarchy shared across the package."""


class UnwrapError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(UnwrapError, ValueError):
    pass


class ConsistencyError(UnwrapError):
    """An internal invariant was violated (e.g. unwrapped input passed where wrapped was expected)."""


class ProblemTooLargeError(UnwrapError):
    pass


class InvalidStateError(UnwrapError):
    pass


class GenerationFailedError(UnwrapError):
    pass


class GridFormatError(UnwrapError):
    """Malformed grid file. ``offset`` is the byte offset where parsing failed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
