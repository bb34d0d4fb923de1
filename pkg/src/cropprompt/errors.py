"""Exception hierarchy for the cropprompt package.

Every error raised by library code derives from CropPromptError so pipeline
callers can catch one type per tile without masking programming errors.
"""


class CropPromptError(Exception):
    """Base class for all cropprompt errors."""


class SingularTransform(CropPromptError):
    """Geotransform determinant is zero; pixel/world mapping not invertible."""


class MissingGeoreference(CropPromptError):
    """GeoTIFF lacks geotransform tags or a CRS GeoKey."""


class UnsupportedEncoding(CropPromptError):
    """TIFF uses a layout or sample format this reader does not handle."""


class IoFailure(CropPromptError):
    """Raster file could not be written."""


class CrsMismatch(CropPromptError):
    """Source and target rasters use different coordinate reference systems."""


class NoCoverage(CropPromptError):
    """Operation requires source coverage but the window has none."""


class AbsentClass(CropPromptError):
    """A prompt class has too few pixels and policy is set to error."""


class EmptyPlan(CropPromptError):
    """Prompt plan contains no points."""


class NoPoints(CropPromptError):
    """Decode called with an empty prompt set."""


class BackendFailure(CropPromptError):
    """Wraps a fault raised inside a segmentation backend."""


class GraphLoadError(CropPromptError):
    """Serialized network graph could not be loaded."""


class ShapeMismatch(CropPromptError):
    """Input tensor or raster has an incompatible shape."""


class InferenceFailure(CropPromptError):
    """Network graph execution failed."""


class DimensionMismatch(CropPromptError):
    """Two grids that must align have different dimensions."""


class EmptyInput(CropPromptError):
    """Aggregation called with no reports."""


class ConfigError(CropPromptError):
    """Run configuration is invalid or references missing paths."""
