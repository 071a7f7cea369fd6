"""Haralick GLCM entropy: single windows, full-image maps and benchmarks.

Two map strategies are provided. ``entropy_map_naive`` rebuilds the
co-occurrence matrix for every pixel and scans all ``g * g`` cells; it is
slow and obviously correct, and serves as the ground truth. The
incremental strategy slides the window along each row, updating only the
pairs that enter or leave, and keeps a running ``sum(c * log c)`` so each
step costs ``O(window)`` instead of ``O(window**2 + g**2)``.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _glcm_kernels as K
from .errors import ConfigError, EmptyGlcmError, InvalidInputError
from .image_core import QuantizedImage, replicate_pad

LOG_BASES = ("natural", "base2")
STRATEGIES = ("naive", "incremental")


@dataclass(frozen=True)
class GlcmParams:
    """Co-occurrence settings.

    Defaults: 64 gray levels, a 5x5 window, offset ``(0, 1)`` counted in
    both directions, natural log.
    """

    g: int = 64
    window: int = 5
    offset: tuple[int, int] = (0, 1)
    symmetric: bool = True
    log_base: str = "natural"

    def __post_init__(self):
        dr, dc = (int(v) for v in self.offset)
        object.__setattr__(self, "offset", (dr, dc))
        if not 2 <= self.g <= 65536:
            raise ConfigError(f"g must be in [2, 65536], got {self.g}")
        if self.window < 3 or self.window % 2 == 0:
            raise ConfigError(f"window must be odd and >= 3, got {self.window}")
        if (dr, dc) == (0, 0):
            raise ConfigError("offset must be non-zero")
        if abs(dr) >= self.window or abs(dc) >= self.window:
            raise ConfigError(f"offset {self.offset} does not fit a {self.window}-wide window")
        if self.log_base not in LOG_BASES:
            raise ConfigError(f"log_base must be one of {LOG_BASES}, got {self.log_base!r}")

    @property
    def pairs_per_window(self):
        dr, dc = self.offset
        return (self.window - abs(dr)) * (self.window - abs(dc))

    @property
    def total(self):
        return self.pairs_per_window * (2 if self.symmetric else 1)

    @property
    def log_scale(self):
        """Divisor turning natural-log entropy into the configured base."""
        return math.log(2.0) if self.log_base == "base2" else 1.0

    @property
    def max_entropy(self):
        return 2.0 * math.log(self.g) / self.log_scale

    @property
    def entropy_ceiling(self):
        """Largest entropy one window can reach: every counted pair in its own cell."""
        return math.log(min(self.total, self.g * self.g)) / self.log_scale


@dataclass(frozen=True, eq=False)
class Glcm:
    counts: np.ndarray
    total: int
    params: GlcmParams

    def __post_init__(self):
        if int(self.counts.sum()) != self.total:
            raise InvalidInputError("GLCM total does not match its counts")


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Per-pixel feature values; ``params`` is None for maps read from disk."""

    values: np.ndarray
    params: GlcmParams | None = None
    kind: str = field(default="oracle")

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or 0 in v.shape:
            raise InvalidInputError(f"feature map must be non-empty 2-D, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("feature map contains non-finite values")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape


def glcm_from_window(window, params: GlcmParams) -> Glcm:
    """Count level pairs ``(p, p + offset)`` lying wholly inside ``window``.

    Any rectangular window is accepted; pairs that would leave it are not
    counted.
    """
    w = np.asarray(window)
    if w.ndim != 2:
        raise InvalidInputError("window must be 2-D")
    if w.dtype.kind not in "iu":
        raise InvalidInputError("window levels must be integers")
    if w.min() < 0 or w.max() >= params.g:
        raise InvalidInputError(f"window levels must lie in [0, {params.g})")
    dr, dc = params.offset
    h, wd = w.shape
    src = w[max(0, -dr) : h - max(0, dr), max(0, -dc) : wd - max(0, dc)]
    dst = w[max(0, dr) : h - max(0, -dr), max(0, dc) : wd - max(0, -dc)]
    counts = np.zeros((params.g, params.g), dtype=np.int64)
    np.add.at(counts, (src.ravel(), dst.ravel()), 1)
    if params.symmetric:
        counts = counts + counts.T
    return Glcm(counts, int(counts.sum()), params)


def glcm_entropy(glcm: Glcm) -> float:
    """``-sum p log p`` over non-zero cells, ``p = count / total``."""
    if glcm.total <= 0:
        raise EmptyGlcmError("entropy of an empty GLCM is undefined")
    c = glcm.counts[glcm.counts > 0].astype(np.float64)
    p = c / glcm.total
    return float(-(p * np.log(p)).sum() / glcm.params.log_scale)


def _check(img: QuantizedImage, params: GlcmParams):
    if not isinstance(img, QuantizedImage):
        raise InvalidInputError("expected a QuantizedImage")
    if img.g != params.g:
        raise ConfigError(f"image has g={img.g} but params ask for g={params.g}")


def _row_chunks(height, threads):
    threads = max(1, min(threads, height))
    bounds = np.linspace(0, height, threads + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _run_rows(img, params, threads, worker):
    padded = np.ascontiguousarray(replicate_pad(img, params.window // 2).levels)
    out = np.empty(img.shape, dtype=np.float64)
    chunks = _row_chunks(img.height, threads or 1)
    if len(chunks) == 1:
        worker(padded, out, *chunks[0])
    else:
        # disjoint output rows; each worker owns its count buffer
        with ThreadPoolExecutor(len(chunks)) as pool:
            list(pool.map(lambda ab: worker(padded, out, *ab), chunks))
    if params.log_base != "natural":
        out /= params.log_scale
    # rounding can leave values a few ulps outside the valid range
    np.clip(out, 0.0, params.entropy_ceiling, out=out)
    return FeatureMap(out, params)


def entropy_map_naive(img: QuantizedImage, params: GlcmParams = GlcmParams(), threads=1):
    """Reference map: GLCM rebuilt from scratch at every pixel."""
    _check(img, params)
    dr, dc = params.offset

    def worker(padded, out, r0, r1):
        counts = np.zeros((params.g, params.g), dtype=np.int64)
        K.naive_rows(padded, out, r0, r1, params.g, params.window, dr, dc, params.symmetric, counts)

    return _run_rows(img, params, threads, worker)


def entropy_map_incremental(
    img: QuantizedImage, params: GlcmParams = GlcmParams(), threads=1
):
    """Sliding-window map, equal to the naive map to ~1e-12."""
    _check(img, params)
    dr, dc = params.offset
    tables = K.cell_tables(params.total, params.symmetric)

    def worker(padded, out, r0, r1):
        cells = np.zeros(params.g * params.g, dtype=np.int64)
        K.incremental_rows(
            padded, out, r0, r1, params.g, params.window, dr, dc, params.symmetric, cells,
            tables,
        )

    return _run_rows(img, params, threads, worker)


def entropy_map(img, params: GlcmParams = GlcmParams(), strategy="incremental", threads=1):
    if strategy == "naive":
        return entropy_map_naive(img, params, threads)
    if strategy == "incremental":
        return entropy_map_incremental(img, params, threads)
    raise ConfigError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


class SlidingGlcm:
    """Stateful sliding window over one row, exposing counts and ``sum c log c``.

    Uses the same compiled update steps as ``entropy_map_incremental``.
    """

    def __init__(self, img: QuantizedImage, params: GlcmParams, row=0):
        _check(img, params)
        self.params = params
        self.padded = np.ascontiguousarray(replicate_pad(img, params.window // 2).levels)
        self._cells = np.zeros(params.g * params.g, dtype=np.int64)
        self._tables = K.cell_tables(params.total, params.symmetric)
        self.row = row
        self.col = 0
        self.width = img.width
        dr, dc = params.offset
        self.s = K.window_add(
            self.padded, self._cells, row, 0, params.g, params.window, dr, dc,
            params.symmetric, 1, 0.0, self._tables,
        )

    @property
    def counts(self):
        return K.expand_cells(self._cells, self.params.g, self.params.symmetric)

    @property
    def total(self):
        return self.params.total

    def slide(self):
        if self.col + 1 >= self.width:
            raise IndexError("window is already at the last column")
        p = self.params
        dr, dc = p.offset
        self.s = K.window_slide(
            self.padded, self._cells, self.row, self.col, p.g, p.window, dr, dc,
            p.symmetric, self.s, self._tables,
        )
        self.col += 1

    def entropy(self):
        t = self.total
        return (math.log(t) - self.s / t) / self.params.log_scale

    def window(self):
        w = self.params.window
        return self.padded[self.row : self.row + w, self.col : self.col + w]


# -- benchmarking -----------------------------------------------------------

BENCH_FIELDS = (
    "strategy", "height", "width", "g", "window", "seconds", "pixels_per_sec",
    "speedup_vs_naive",
)


@dataclass
class BenchRow:
    strategy: str
    height: int
    width: int
    g: int
    window: int
    seconds: float
    pixels_per_sec: float
    speedup_vs_naive: float = float("nan")


@dataclass
class BenchReport:
    rows: list[BenchRow]

    def __len__(self):
        return len(self.rows)

    def speedup(self, strategy, height, width=None):
        width = height if width is None else width
        for r in self.rows:
            if r.strategy == strategy and (r.height, r.width) == (height, width):
                return r.speedup_vs_naive
        raise KeyError((strategy, height, width))

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(BENCH_FIELDS)
        for r in self.rows:
            w.writerow(
                [r.strategy, r.height, r.width, r.g, r.window, f"{r.seconds:.6f}",
                 f"{r.pixels_per_sec:.1f}", f"{r.speedup_vs_naive:.3f}"]
            )
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _bench_image(h, w, g, seed):
    from .rng import Stream

    u = Stream(seed).uniform((h, w))
    return QuantizedImage(np.minimum((u * g).astype(np.int32), g - 1), g)


def bench(sizes, params: GlcmParams = GlcmParams(), strategies=STRATEGIES, seed=0,
          repeats=1, threads=1):
    """Time each strategy on seeded random images of each size.

    ``sizes`` holds ints (square) or ``(height, width)`` pairs. Speedups are
    relative to the naive strategy on the same image; when naive is not in
    ``strategies`` they are NaN.
    """
    if not sizes or not strategies:
        raise ConfigError("bench needs at least one size and one strategy")
    for s in strategies:
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}")
    # compile outside the timed region
    warm = _bench_image(8, 8, params.g, seed)
    for s in set(strategies):
        entropy_map(warm, params, s)

    rows = []
    for size in sizes:
        h, w = (size, size) if np.isscalar(size) else size
        img = _bench_image(int(h), int(w), params.g, seed)
        times = {}
        for s in strategies:
            best = math.inf
            for _ in range(max(1, repeats)):
                t0 = time.perf_counter()
                entropy_map(img, params, s, threads=threads)
                best = min(best, time.perf_counter() - t0)
            times[s] = best
        for s in strategies:
            sec = times[s]
            speed = times["naive"] / sec if "naive" in times else float("nan")
            rows.append(BenchRow(s, int(h), int(w), params.g, params.window, sec,
                                 h * w / sec, speed))
    return BenchReport(rows)


def default_threads():
    return os.cpu_count() or 1
