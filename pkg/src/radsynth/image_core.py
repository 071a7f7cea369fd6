"""Image containers, gray-level quantization, padding, masks and patches."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError

MAX_LEVELS = 65536


def _as_2d(a, name, dtype=None):
    a = np.asarray(a, dtype=dtype)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Real-valued intensity image, row-major, row 0 at the top."""

    pixels: np.ndarray

    def __post_init__(self):
        px = _as_2d(self.pixels, "pixels", dtype=np.float64)
        if not np.all(np.isfinite(px)):
            raise InvalidInputError("image contains non-finite intensities")
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def shape(self):
        return self.pixels.shape

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class QuantizedImage:
    """Integer gray levels in ``[0, g)``."""

    levels: np.ndarray
    g: int

    def __post_init__(self):
        g = int(self.g)
        if not 2 <= g <= MAX_LEVELS:
            raise InvalidInputError(f"g must be in [2, {MAX_LEVELS}], got {g}")
        lv = _as_2d(self.levels, "levels")
        if lv.dtype.kind not in "iu":
            if not np.all(np.equal(np.mod(lv, 1), 0)):
                raise InvalidInputError("levels must be integers")
        lv = lv.astype(np.int32)
        if lv.min() < 0 or lv.max() >= g:
            raise InvalidInputError(f"levels must lie in [0, {g}), got [{lv.min()}, {lv.max()}]")
        lv.flags.writeable = False
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "g", g)

    @property
    def height(self):
        return self.levels.shape[0]

    @property
    def width(self):
        return self.levels.shape[1]

    @property
    def shape(self):
        return self.levels.shape

    def __eq__(self, other):
        return (
            isinstance(other, QuantizedImage)
            and self.g == other.g
            and np.array_equal(self.levels, other.levels)
        )


@dataclass(frozen=True, eq=False)
class RoiMask:
    flags: np.ndarray
    label: str = "roi"

    def __post_init__(self):
        f = _as_2d(self.flags, "flags").astype(bool)
        f.flags.writeable = False
        object.__setattr__(self, "flags", f)

    @property
    def shape(self):
        return self.flags.shape

    @property
    def count(self):
        return int(self.flags.sum())

    def __eq__(self, other):
        return isinstance(other, RoiMask) and np.array_equal(self.flags, other.flags)


@dataclass(frozen=True, eq=False)
class PatchSet:
    """Square level windows, one per center, with optional regression targets."""

    patch_size: int
    patches: np.ndarray  # (n, P, P)
    centers: np.ndarray  # (n, 2) as (row, col)
    targets: np.ndarray | None = None
    source_shape: tuple = field(default=(0, 0))

    def __post_init__(self):
        p = self.patch_size
        if self.patches.ndim != 3 or self.patches.shape[1:] != (p, p):
            raise InvalidInputError(f"patches must have shape (n, {p}, {p})")
        if len(self.centers) != len(self.patches):
            raise InvalidInputError("one center per patch required")
        if self.targets is not None and len(self.targets) != len(self.patches):
            raise InvalidInputError("targets must match patches in length")

    def __len__(self):
        return len(self.patches)


def quantize(img: GrayImage, g: int = 64) -> QuantizedImage:
    """Uniform min-max binning of intensities into ``g`` levels.

    ``level = min(g - 1, floor((v - vmin) / (vmax - vmin) * g))``; a
    constant image maps entirely to level 0.
    """
    if not isinstance(img, GrayImage):
        img = GrayImage(img)
    g = int(g)
    if not 2 <= g <= MAX_LEVELS:
        raise InvalidInputError(f"g must be in [2, {MAX_LEVELS}], got {g}")
    px = img.pixels
    vmin, vmax = px.min(), px.max()
    if vmax == vmin:
        return QuantizedImage(np.zeros(px.shape, dtype=np.int32), g)
    scaled = np.floor((px - vmin) / (vmax - vmin) * g)
    return QuantizedImage(np.minimum(scaled, g - 1).astype(np.int32), g)


def replicate_pad(img: QuantizedImage, margin: int) -> QuantizedImage:
    if margin < 0:
        raise InvalidInputError(f"margin must be >= 0, got {margin}")
    if margin == 0:
        return img
    return QuantizedImage(np.pad(img.levels, margin, mode="edge"), img.g)


def extract_patches(img: QuantizedImage, patch_size: int = 5, labels=None) -> PatchSet:
    """One ``patch_size`` window per pixel of ``img`` after replicate padding.

    ``labels`` may be a FeatureMap or a 2-D array of the image's shape; its
    value at each center becomes that patch's target.
    """
    if patch_size < 1 or patch_size % 2 == 0:
        raise InvalidInputError(f"patch_size must be odd, got {patch_size}")
    if img.height < patch_size or img.width < patch_size:
        raise InvalidInputError(
            f"image {img.height}x{img.width} is smaller than patch size {patch_size}"
        )
    padded = replicate_pad(img, patch_size // 2).levels
    windows = sliding_window_view(padded, (patch_size, patch_size))
    patches = windows.reshape(-1, patch_size, patch_size)
    rows, cols = np.indices(img.shape)
    centers = np.stack([rows.ravel(), cols.ravel()], axis=1)
    targets = None
    if labels is not None:
        values = np.asarray(getattr(labels, "values", labels), dtype=np.float64)
        if values.shape != img.shape:
            raise InvalidInputError(
                f"label map shape {values.shape} does not match image {img.shape}"
            )
        targets = values.ravel().copy()
    return PatchSet(patch_size, patches, centers, targets, source_shape=img.shape)
