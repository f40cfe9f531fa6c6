"""Exception types raised by the lumirec pipeline."""


class LumirecError(Exception):
    """Base class for all lumirec errors."""


class MalformedRecord(LumirecError):
    """Event line is not valid JSON or misses a mandatory field."""


class UnknownRoom(LumirecError):
    """Event group id maps to no known room type."""


class EmptyWindow(LumirecError):
    """State reconstruction was asked for an empty date range."""


class DegenerateProfile(LumirecError):
    """Knee detection received a constant (or empty) value vector."""


class TooFewPoints(LumirecError):
    """k-means asked for more clusters than there are points."""


class DimensionMismatch(LumirecError):
    """Vector dimensionality does not match the fitted model."""


class KTooLarge(LumirecError):
    """KNN neighbour count exceeds the training-set size."""


class UntrainedModel(LumirecError):
    """Operation requires a fitted model."""


class LengthMismatch(LumirecError):
    """Paired label vectors have different lengths."""


class EmptyMatrix(LumirecError):
    """Metrics requested on a confusion matrix with zero observations."""


class InsufficientHouseholds(LumirecError):
    """Too few households to form a non-empty held-out split."""


class InvalidSpec(LumirecError):
    """Synthetic population spec violates its invariants."""


class MissingArtifact(LumirecError):
    """A pipeline stage ran before its predecessor produced its artifact."""

    def __init__(self, stage: str):
        super().__init__(f"missing artifact from required stage: {stage}")
        self.stage = stage


class ConfigHashMismatch(LumirecError):
    """Artifacts in the workspace were produced under different configs."""
