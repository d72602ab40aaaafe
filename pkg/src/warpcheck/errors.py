"""Exception types shared across the warpcheck modules."""


class WarpcheckError(Exception):
    """Base class for all warpcheck errors."""


class DegenerateConfiguration(WarpcheckError):
    """Landmark configuration has no spatial extent (all points coincide)."""


class NonInvertible(WarpcheckError):
    """Similarity transform scale underflowed to zero."""


class DegeneratePolygon(WarpcheckError):
    """Polygon mask requested for fewer than 3 non-collinear vertices."""


class DimensionMismatch(WarpcheckError):
    """Images/masks passed to a compositing operation disagree in shape."""


class ShapeMismatch(WarpcheckError):
    """Network input does not match the architecture's expected shape."""


class EmptyBox(WarpcheckError):
    """Landmark bounding box has zero area or lies outside the image."""


class InsufficientInput(WarpcheckError):
    """Not enough source images to assemble a training batch."""


class EmptyVideo(WarpcheckError):
    """Video-level aggregation requested for an empty score list."""


class SingleClass(WarpcheckError):
    """AUC requested for labels that are all identical."""


class CheckpointError(WarpcheckError):
    """Checkpoint file is missing, corrupt, or from an unknown format."""


class ConfigError(WarpcheckError):
    """Run configuration failed schema validation."""


class ManifestError(WarpcheckError):
    """Dataset manifest is malformed."""
