"""Exception types shared across the toolkit."""


class SaldrnError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SaldrnError):
    """Bad configuration: unknown key, unparsable value, missing path."""


class EmptyDatasetError(SaldrnError):
    """A dataset directory contains no decodable images."""


class InvalidScaleError(SaldrnError):
    """Scale factor outside the supported range."""


class InputTooSmallError(SaldrnError):
    """Input smaller than the operation can handle."""


class ContractViolation(SaldrnError):
    """Caller broke an interface contract (shape or count mismatch)."""


class TrainingDiverged(SaldrnError):
    """Loss became non-finite; carries the step whose batch triggered it."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
