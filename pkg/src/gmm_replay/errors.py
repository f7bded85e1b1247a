"""Exception types shared across the package."""


class GmmReplayError(Exception):
    """Base class for all package-specific errors."""


class WrongMagic(GmmReplayError):
    """IDX file does not start with the expected magic number."""


class TruncatedPayload(GmmReplayError):
    """IDX header promises more data than the file contains."""


class OverlappingClasses(GmmReplayError):
    """Class-incremental task definition reuses a class."""


class UnknownClass(GmmReplayError):
    """Task definition references a class absent from the dataset."""


class EmptyTask(GmmReplayError):
    """A task ended up with zero samples."""


class NonSquareK(GmmReplayError):
    """Component count does not admit a square grid layout."""


class DimensionMismatch(GmmReplayError):
    """Feature dimensions of inputs disagree."""


class EmptyBatch(GmmReplayError):
    """An operation received a batch with no samples."""


class NonFiniteGradient(GmmReplayError):
    """A gradient evaluation produced NaN or infinity."""


class InvalidSimplex(GmmReplayError):
    """Vector is not a valid probability distribution."""


class SOutOfRange(GmmReplayError):
    """Top-S cutoff outside [1, K]."""


class IndexOutOfRange(GmmReplayError):
    """Component or class index outside the valid range."""


class LengthMismatch(GmmReplayError):
    """Paired sequences have different lengths."""


class StageOutOfRange(GmmReplayError):
    """Requested evaluation stage exceeds the recorded stages."""


class IncompleteRecord(GmmReplayError):
    """Run record is missing per-stage data."""


class InvalidRatio(GmmReplayError):
    """Replay mixing ratio is negative or inconsistent."""


class NotInitialized(GmmReplayError):
    """Replay update requested before the initial fit."""


class SecondInitialFit(GmmReplayError):
    """initial_fit called on a scholar that was already fit."""


class CheckpointError(GmmReplayError):
    """Checkpoint file is malformed or version-incompatible."""


class ConfigError(GmmReplayError):
    """Run configuration is invalid."""
