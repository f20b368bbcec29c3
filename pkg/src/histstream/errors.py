"""Exception hierarchy shared by every module."""


class HistStreamError(Exception):
    """Base class for all package errors."""


class ConfigError(HistStreamError, ValueError):
    """Invalid parameters or inconsistent configuration."""


class InputError(HistStreamError, ValueError):
    """A value handed to an operation is outside its domain."""


class DataError(HistStreamError):
    """A data file is missing, unreadable or malformed."""


class StateError(HistStreamError, RuntimeError):
    """An operation was called on an object that is not ready for it."""


class NoRelevantInstancesError(StateError):
    """No logged instance reaches the relevance threshold."""


class RunError(HistStreamError, RuntimeError):
    """A prequential run could not complete.

    ``index`` is the stream position of the offending instance, when known.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message if index is None else f"{message} (instance {index})")
        self.index = index


class DivergenceError(RunError):
    """A learner produced non-finite parameters or predictions."""
