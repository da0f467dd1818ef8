"""Exception types raised across the toolkit."""


class ChronochromaError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(ChronochromaError):
    """Frames or arrays that must share dimensions do not."""


class ShapeError(ChronochromaError):
    """A tensor has a shape incompatible with the requested operation."""


class NoFramesError(ChronochromaError):
    """A frame directory or sequence contains no frames."""


class TooShortError(ChronochromaError):
    """A sequence is too short for the requested window or split."""


class ConfigError(ChronochromaError):
    """An invalid configuration value."""


class FrameIOError(ChronochromaError):
    """A frame file could not be read or written; message names the path."""


class CheckpointError(ChronochromaError):
    """A checkpoint file is missing, malformed, or has the wrong format tag."""


class TrainingDivergenceError(ChronochromaError):
    """Training produced a non-finite loss; carries the offending record."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
