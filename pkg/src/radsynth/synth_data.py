"""Deterministic synthetic textures standing in for clinical slices.

Every image is a pure function of its :class:`TextureSpec`. Randomness
comes from :mod:`radsynth.rng` (SplitMix64); per-image seeds are
``derive_seed(corpus_seed, index)``. White noise is drawn as 16-bit
integers and box-blurred with integer running sums, so the smoothed-noise
textures are exact in any floating-point environment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidInputError
from .glcm import FeatureMap, GlcmParams, entropy_map_naive
from .image_core import GrayImage, QuantizedImage, quantize
from .rng import Stream, derive_seed

KINDS = ("smoothed_noise", "checker", "gradient", "blob_mixture")
DEFAULT_MIX = ("smoothed_noise", "blob_mixture", "smoothed_noise", "checker", "gradient")

_DEFAULTS = {
    "smoothed_noise": {"corr_length": 3, "passes": 1},
    "checker": {"period": 8, "low": 0.0, "high": 1.0, "noise": 0.0},
    "gradient": {"angle_deg": 0.0, "noise": 0.0},
    "blob_mixture": {"blobs": 6, "radius": 12.0, "contrast": 1.0, "floor": 0.25,
                     "corr_length": 2},
}


@dataclass(frozen=True)
class TextureSpec:
    kind: str
    height: int
    width: int
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown texture kind {self.kind!r}; expected one of {KINDS}")
        if self.height < 1 or self.width < 1:
            raise InvalidInputError(f"texture must have positive area, got {self.height}x{self.width}")
        merged = dict(_DEFAULTS[self.kind])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise InvalidInputError(f"unknown {self.kind} parameters: {sorted(unknown)}")
        merged.update(self.params)
        for key in ("corr_length", "period", "blobs", "passes"):
            if key in merged and int(merged[key]) < 1:
                raise InvalidInputError(f"{key} must be a positive integer")
        if "radius" in merged and merged["radius"] <= 0:
            raise InvalidInputError("radius must be positive")
        object.__setattr__(self, "params", merged)

    def params_json(self):
        return json.dumps(self.params, sort_keys=True, separators=(",", ":"))


def _white_noise(stream: Stream, h, w):
    """Integer noise in [0, 65536)."""
    return (stream.bits(h * w) >> np.uint64(48)).astype(np.int64).reshape(h, w)


def box_sum_wrap(noise: np.ndarray, length: int) -> np.ndarray:
    """Integer sum over a ``length`` x ``length`` window with periodic borders."""
    if length <= 1:
        return noise
    h, w = noise.shape
    lo = length // 2
    hi = length - lo - 1
    p = np.pad(noise, ((lo, hi), (lo, hi)), mode="wrap")
    c = np.zeros((p.shape[0] + 1, p.shape[1] + 1), dtype=np.int64)
    c[1:, 1:] = p.cumsum(0).cumsum(1)
    s = c[length:, length:] - c[:-length, length:] - c[length:, :-length] + c[:-length, :-length]
    return s[:h, :w]


def box_blur_wrap(noise: np.ndarray, length: int, passes=1) -> np.ndarray:
    """Mean over a ``length`` x ``length`` window with periodic borders,
    applied ``passes`` times.

    Integer input stays integer until the final division, so the result is
    exact.
    """
    s = np.asarray(noise, dtype=np.int64)
    for _ in range(passes):
        s = box_sum_wrap(s, length)
    return s / float(length * length) ** passes


def gen_texture(spec: TextureSpec) -> GrayImage:
    """Render ``spec`` to a real-valued image (arbitrary units)."""
    h, w = spec.height, spec.width
    p = spec.params
    stream = Stream(spec.seed)
    rows, cols = np.indices((h, w), dtype=np.float64)

    if spec.kind == "smoothed_noise":
        img = box_blur_wrap(_white_noise(stream, h, w), int(p["corr_length"]),
                            int(p["passes"])) / 65536.0
    elif spec.kind == "checker":
        period = int(p["period"])
        parity = ((rows // period) + (cols // period)) % 2
        img = np.where(parity == 1, float(p["high"]), float(p["low"]))
        if p["noise"] > 0:
            img = img + p["noise"] * stream.uniform((h, w))
    elif spec.kind == "gradient":
        a = np.deg2rad(p["angle_deg"])
        img = np.cos(a) * cols + np.sin(a) * rows
        span = np.ptp(img)
        img = img / span if span > 0 else img
        if p["noise"] > 0:
            img = img + p["noise"] * stream.uniform((h, w))
    else:  # blob_mixture
        floor = box_blur_wrap(_white_noise(stream, h, w), int(p["corr_length"])) / 65536.0
        img = p["floor"] * floor
        n = int(p["blobs"])
        u = stream.uniform((n, 4))
        for cy, cx, r, k in zip(u[:, 0] * h, u[:, 1] * w, p["radius"] * (0.5 + u[:, 2]),
                                p["contrast"] * (0.5 + u[:, 3])):
            img = img + k * np.exp(-((rows - cy) ** 2 + (cols - cx) ** 2) / (2.0 * r * r))
    return GrayImage(img)


def _r(v, digits):
    return float(round(float(v), digits))


def default_spec(index, seed, size, kinds=DEFAULT_MIX) -> TextureSpec:
    """Spec for corpus item ``index``: kind cycles through ``kinds``, parameters
    are drawn from the item's own seed."""
    s = derive_seed(seed, index)
    kind = kinds[index % len(kinds)]
    u = Stream(s ^ 0x5DEECE66D).uniform(4)
    if kind == "smoothed_noise":
        params = {"corr_length": int(5 + u[0] * 10), "passes": int(2 + u[1] * 2)}
    elif kind == "checker":
        params = {"period": int(3 + u[0] * 14), "noise": _r(0.03 + 0.05 * u[1], 4)}
    elif kind == "gradient":
        params = {"angle_deg": _r(360.0 * u[0], 2), "noise": _r(0.01 + 0.06 * u[1], 4)}
    else:
        params = {"blobs": int(3 + u[0] * 8), "radius": _r(6.0 + 14.0 * u[1], 2),
                  "floor": _r(0.1 + 0.2 * u[2], 4), "corr_length": int(1 + u[3] * 3)}
    return TextureSpec(kind, size, size, s, params)


@dataclass
class CorpusItem:
    index: int
    spec: TextureSpec
    image: QuantizedImage
    label: FeatureMap


def gen_corpus(n_images=12, size=128, g=64, kinds=DEFAULT_MIX, seed=7,
               params: GlcmParams | None = None, specs=None) -> list[CorpusItem]:
    """Quantized synthetic images with naive-oracle entropy labels.

    Needs at least two images so that two-fold cross-validation is possible.
    """
    if n_images < 2:
        raise ConfigError(f"a corpus needs at least 2 images for cross-validation, got {n_images}")
    params = params or GlcmParams(g=g)
    if params.g != g:
        raise ConfigError(f"params.g={params.g} does not match g={g}")
    if specs is None:
        for k in kinds:
            if k not in KINDS:
                raise ConfigError(f"unknown texture kind {k!r}")
        specs = [default_spec(i, seed, size, tuple(kinds)) for i in range(n_images)]
    items = []
    for i, spec in enumerate(specs):
        q = quantize(gen_texture(spec), g)
        items.append(CorpusItem(i, spec, q, entropy_map_naive(q, params)))
    return items
