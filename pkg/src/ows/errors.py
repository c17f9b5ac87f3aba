"""Exception hierarchy shared across the pipeline.

Split by how the CLI maps failures to exit codes: usage problems (exit 2),
data/contract violations (exit 3), and I/O failures (exit 4).
"""


class OwsError(Exception):
    """Base class for all pipeline errors."""


class UsageError(OwsError):
    """Bad invocation or configuration (CLI exit 2)."""


class DataError(OwsError):
    """Input data violates a documented contract (CLI exit 3)."""


class ArtifactIOError(OwsError):
    """Reading or writing an artifact failed (CLI exit 4)."""


class ManifestParseError(DataError):
    """Stack manifest is malformed (bad JSON, missing keys, duplicate dates)."""


class MissingFileError(ArtifactIOError):
    """A file referenced by a manifest or flag does not exist."""


class GridMismatchError(DataError):
    """Rasters that must share a grid differ in dims, transform, or CRS."""


class BoundsError(DataError):
    """Index or count outside its permitted range."""


class OutOfBoundsError(DataError):
    """A patch window falls outside the raster and clamping is off."""


class UnknownLocationError(DataError):
    """A sample's location_id has no split assignment."""


class ChannelMismatchError(DataError):
    """Segmenter expects a different frame count than the stack provides."""


class DimMismatchError(DataError):
    """Two masks that must be compared pixel-wise have different shapes."""


class EmptyInputError(DataError):
    """An aggregate operation received no items."""


class ExtentError(DataError):
    """Polygon vertices fall outside the target grid."""


class PlacementError(DataError):
    """Synthetic target placement cannot satisfy the separation constraint."""
