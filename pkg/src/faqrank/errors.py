"""Exception types shared across the package.

The split mirrors the CLI exit-code taxonomy: configuration/usage problems
(exit 1), data problems (exit 2), everything else internal (exit 3).
"""


class FaqrankError(Exception):
    """Base class for all package errors."""


class ConfigError(FaqrankError):
    """Invalid configuration or parameter value."""


class DataError(FaqrankError):
    """Malformed, inconsistent, or referentially broken input data."""


class StageError(FaqrankError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
