"""Exception hierarchy. Every error raised by this package derives from SecoError."""


class SecoError(Exception):
    pass


# --- codecs / file formats ---

class FormatError(SecoError):
    """Input file is not in the expected format."""


class ClassOutOfRange(FormatError):
    """Label raster contains a class index outside [0, K) and not void."""


class RleError(FormatError):
    """Run-length counts violate the encoding contract."""


class SumMismatch(RleError):
    """Run-length counts do not sum to width * height."""


class BadMagic(FormatError):
    """Feature file does not start with the expected magic bytes."""


class TruncatedFile(FormatError):
    """Feature file payload is shorter than the header declares."""


class NonFiniteValue(FormatError):
    """Feature payload contains NaN or Inf."""


class ConfigError(SecoError):
    """Invalid configuration value."""


# --- geometry / masks ---

class DimMismatch(SecoError):
    """Operands have different raster dimensions."""


class BothEmpty(SecoError):
    """IoU of two empty masks is undefined."""


class EmptyMask(SecoError):
    """Operation requires a mask with at least one set pixel."""


# --- segmenter backends ---

class BackendError(SecoError):
    pass


class BackendUnavailable(BackendError):
    """Backend cannot be reached or the model is not loaded."""


class ImageNotFound(BackendError):
    """Backend has no masks / no image for the given reference."""


class EmptyResult(BackendError):
    """Backend answered a prompt with an all-zero mask."""


class EmptyPool(BackendError):
    """Prompt resolution against an empty proposal pool."""


# --- correction stage ---

class DegenerateDataset(SecoError):
    """Classifier training needs at least two distinct labels."""


class TooFewSamples(SecoError):
    """Mixture fitting needs a minimum number of samples."""


class MissingStatistics(SecoError):
    """Connectivity lacks loss / eta / probs required for selection."""


# --- resampling ---

class EmptyInput(SecoError):
    """No refined sets supplied."""


class PoolEmpty(SecoError):
    """Resample pool has no entries."""


class DoesNotFit(SecoError):
    """Pasted region does not fit inside the destination raster."""
