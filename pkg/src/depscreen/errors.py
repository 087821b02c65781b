"""Exception hierarchy shared across the toolkit.

Every error the pipeline can raise on bad data or bad usage derives from
ToolkitError so the CLI can catch one type, print a single machine-readable
line, and exit 1.  Plain OSError is left alone for filesystem failures.
"""


class ToolkitError(Exception):
    """Base class for all toolkit-specific errors."""


# --- audio-io ---

class MalformedContainer(ToolkitError):
    """File is not a well-formed RIFF/WAVE container."""


class UnsupportedEncoding(ToolkitError):
    """WAV format code / bit depth / channel count outside the supported set."""


class EmptyAudio(ToolkitError):
    """Audio payload decodes to zero frames."""


# --- features / augment ---

class ClipTooShort(ToolkitError):
    """Clip shorter than one analysis frame where a full frame is required."""


class ConfigMismatch(ToolkitError):
    """Spectral matrix dimensions disagree with the supplied configuration."""


class EmptyMatrix(ToolkitError):
    """Feature matrix has no frames to aggregate."""


class ShiftExceedsClip(ToolkitError):
    """Requested time shift is as long as the clip itself."""


# --- surveys ---

class BadItemCount(ToolkitError):
    """Response has the wrong number of items for the instrument."""


class ItemOutOfRange(ToolkitError):
    """An item answer falls outside the instrument's allowed range."""


# --- corpus ---

class SchemaError(ToolkitError):
    """Manifest file is missing required columns or has malformed values."""


class ConsistencyError(ToolkitError):
    """Stored label disagrees with the label recomputed from raw scores."""


class DuplicateUtterance(ToolkitError):
    """Two non-augmented rows share (participant, language, sentence)."""


class TooFewEntries(ToolkitError):
    """A stratum is too small to be split at the requested fractions."""


# --- nn ---

class ShapeMismatch(ToolkitError):
    """Tensor shapes are inconsistent with the layer stack."""


class InputTooShort(ToolkitError):
    """Sequence too short for the pooling window."""


class EmptyDataset(ToolkitError):
    """Training requires at least one example."""


class LabelOutOfRange(ToolkitError):
    """A class label is outside 0..K-1."""


class VersionMismatch(ToolkitError):
    """Stored model architecture does not match what the caller expects."""


class CorruptFile(ToolkitError):
    """Serialized file is truncated or fails its integrity check."""


# --- eval ---

class MissingFeatures(ToolkitError):
    """A manifest entry has no feature vector in the container."""


class ClassMismatch(ToolkitError):
    """Labels in the data do not fit the model's class set."""
