"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SonoAngleError(Exception):
    exit_code = 1


class ConfigError(SonoAngleError, ValueError):
    exit_code = 2


class ValidationError(SonoAngleError, ValueError):
    exit_code = 3


class DataIOError(SonoAngleError, OSError):
    exit_code = 3


class DegenerateChannelError(ValidationError):
    """A channel has zero variance and cannot be standardized."""


class EmptyTracksError(ValidationError):
    """No feature point survived tracking."""


class NumericalError(SonoAngleError, ArithmeticError):
    exit_code = 4


class StageError(SonoAngleError):
    """Wraps an error raised inside a pipeline stage, keeping its exit code."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
