"""Exception types shared across the package."""


class TopovoxError(Exception):
    """Base class for all package errors."""


class FormatError(TopovoxError):
    """Malformed file: bad magic, bad header, or unparseable manifest."""


class UnsupportedDatatypeError(FormatError):
    """Volume file declares a scalar type this package does not read."""


class TruncationError(FormatError):
    """Payload holds fewer bytes than the declared dimensions require."""


class InvalidDataError(TopovoxError):
    """Volume contains NaN or infinite intensities."""


class OutOfRangeError(TopovoxError):
    """Slab window or index outside the volume extent."""


class OracleTooLargeError(TopovoxError):
    """Complex exceeds the dense rank oracle's cell cap."""


class DegenerateLabelsError(TopovoxError):
    """Training data contains a single class."""


class ShapeError(TopovoxError):
    """Feature vector length does not match what the model was trained on."""


class EmptySelectionError(TopovoxError):
    """Importance threshold exceeds every score; no features retained."""


class DegenerateCovarianceError(TopovoxError):
    """PCA input has zero variance in every direction."""


class MissingClassError(TopovoxError):
    """An expected class has no samples."""


class InsufficientDataError(TopovoxError):
    """A class is too small for the requested split."""


class UndefinedMetricError(TopovoxError):
    """Metric is undefined for this input (e.g. AUC with one class)."""


class InternalInvariantError(TopovoxError):
    """An internal consistency check failed; indicates a bug, not bad input."""
