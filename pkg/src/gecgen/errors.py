"""Exception types shared across the package."""


class GecGenError(Exception):
    """Base class for all errors raised by this package."""


class EmptyInput(GecGenError):
    """Input text had no content after normalization."""


class ConfigError(GecGenError):
    """A configuration value or combination of values is invalid."""


class ProtocolViolation(GecGenError):
    """A predictor request or response broke the wire/API contract."""


class BackendUnavailable(GecGenError):
    """The predictor backend could not be reached (retryable)."""


class ParseError(GecGenError):
    """A structured input file is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InputError(GecGenError):
    """Inputs to an evaluation or pipeline call are inconsistent."""


class CountError(GecGenError):
    """Not enough records to satisfy a requested sample size."""

