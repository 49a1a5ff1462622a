"""Exception hierarchy shared by every module."""


class StereoError(Exception):
    """Base class for all package errors."""


class FormatError(StereoError, ValueError):
    """A file does not follow the expected binary layout."""


class UnsupportedFormatError(FormatError):
    """The file is a recognised but unsupported variant (e.g. color PFM)."""


class TruncatedFileError(FormatError):
    """The payload ended before the header said it would."""


class VersionError(FormatError):
    """Weight file carries an unknown magic/version tag."""


class DimensionError(StereoError, ValueError):
    """Array shapes do not agree or are too small for the operation."""


class DataError(StereoError, ValueError):
    """Values are out of the allowed domain (NaN, inf, out of range)."""


class EvaluationError(StereoError, ValueError):
    """No pixels are available to evaluate."""


class TrainingError(StereoError, RuntimeError):
    """Training diverged (non-finite loss)."""


class NotFittedError(StereoError, AttributeError):
    """Estimator used before ``fit``."""


class GenerationError(StereoError, ValueError):
    """Not enough valid area to sample what was asked for."""
