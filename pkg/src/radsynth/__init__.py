"""GLCM entropy feature maps, a CNN surrogate that synthesizes them, and
agreement statistics between the two."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DomainError,
    EmptyGlcmError,
    InvalidInputError,
    ParseError,
    RadsynthError,
    ShapeError,
    UninitializedStatsError,
)
from .glcm import (
    FeatureMap,
    Glcm,
    GlcmParams,
    bench,
    entropy_map,
    entropy_map_incremental,
    entropy_map_naive,
    glcm_entropy,
    glcm_from_window,
)
from .image_core import (
    GrayImage,
    PatchSet,
    QuantizedImage,
    RoiMask,
    extract_patches,
    quantize,
    replicate_pad,
)
