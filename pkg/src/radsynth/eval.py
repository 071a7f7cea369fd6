"""Agreement statistics between oracle and synthesized feature maps.

Pearson correlation, percentage difference and Bland-Altman analysis,
computed per ROI and pooled. Differences run reference minus test and all
standard deviations are population (1/n) deviations.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError
from .glcm import FeatureMap
from .image_core import RoiMask

LOA_Z = 1.96

REPORT_FIELDS = ("label", "n", "pearson_r", "pct_mean", "pct_std", "ba_bias", "ba_loa_low",
                 "ba_loa_high", "excluded")
PLOT_FIELDS = ("label", "oracle_value", "synth_value", "pair_mean", "pair_diff")


@dataclass(frozen=True, eq=False)
class PairedSample:
    reference: np.ndarray
    test: np.ndarray
    label: str = "sample"

    def __post_init__(self):
        ref = np.asarray(self.reference, dtype=np.float64).ravel()
        tst = np.asarray(self.test, dtype=np.float64).ravel()
        if ref.shape != tst.shape:
            raise InvalidInputError(
                f"{self.label}: reference and test lengths differ ({ref.size} vs {tst.size})"
            )
        if ref.size < 2:
            raise InvalidInputError(f"{self.label}: need at least 2 paired values, got {ref.size}")
        if not (np.all(np.isfinite(ref)) and np.all(np.isfinite(tst))):
            raise InvalidInputError(f"{self.label}: non-finite values in sample")
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "test", tst)

    def __len__(self):
        return self.reference.size

    def swapped(self):
        return PairedSample(self.test, self.reference, self.label)


def _sample(x, y=None, label="sample"):
    if isinstance(x, PairedSample):
        return x
    return PairedSample(x, y, label)


def pearson(sample, test=None) -> float:
    """Product-moment correlation; undefined when either series is constant."""
    s = _sample(sample, test)
    x = s.reference - s.reference.mean()
    y = s.test - s.test.mean()
    sxx = float(x @ x)
    syy = float(y @ y)
    if sxx == 0.0 or syy == 0.0:
        raise DomainError(f"{s.label}: correlation undefined for a constant series")
    r = float(x @ y) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def percentage_difference(sample, test=None) -> tuple[float, float]:
    """Mean and population std of ``|test - ref| / |ref|``, as fractions."""
    s = _sample(sample, test)
    small = np.flatnonzero(np.abs(s.reference) < 1e-12)
    if small.size:
        shown = ", ".join(str(i) for i in small[:10])
        more = "" if small.size <= 10 else f", ... ({small.size} total)"
        raise DomainError(f"{s.label}: reference values too close to zero at indices {shown}{more}")
    d = np.abs(s.test - s.reference) / np.abs(s.reference)
    return float(d.mean()), float(d.std())


def bland_altman(sample, test=None) -> tuple[float, float, float]:
    """(bias, lower limit, upper limit) with limits at bias -/+ 1.96 sd."""
    s = _sample(sample, test)
    d = s.reference - s.test
    bias = float(d.mean())
    sd = float(d.std())
    return bias, bias - LOA_Z * sd, bias + LOA_Z * sd


def roi_extract(fmap, mask: RoiMask) -> np.ndarray:
    """Map values under the mask's true flags, row-major."""
    values = np.asarray(getattr(fmap, "values", fmap))
    if values.shape != mask.shape:
        raise InvalidInputError(
            f"mask {mask.label!r} shape {mask.shape} does not match map shape {values.shape}"
        )
    if not mask.flags.any():
        raise InvalidInputError(f"mask {mask.label!r} is empty")
    return values[mask.flags]


@dataclass
class AgreementReport:
    label: str
    n: int
    pearson_r: float
    pct_diff_mean: float
    pct_diff_std: float
    ba_bias: float
    ba_loa_low: float
    ba_loa_high: float
    excluded: int = 0

    def row(self):
        return [self.label, self.n] + [
            repr(float(v)) for v in (self.pearson_r, self.pct_diff_mean, self.pct_diff_std,
                                     self.ba_bias, self.ba_loa_low, self.ba_loa_high)
        ] + [self.excluded]


def report_for(sample: PairedSample, exclude_below=1e-9) -> AgreementReport:
    """Full agreement summary of one sample.

    Pearson is NaN when a series is constant. Reference values with
    ``|v| < exclude_below`` are left out of the percentage difference only,
    and counted in ``excluded``.
    """
    try:
        r = pearson(sample)
    except DomainError:
        r = float("nan")
    keep = np.abs(sample.reference) >= max(exclude_below, 1e-12)
    excluded = int((~keep).sum())
    if keep.sum() >= 1:
        d = np.abs(sample.test[keep] - sample.reference[keep]) / np.abs(sample.reference[keep])
        pm, ps = float(d.mean()), float(d.std())
    else:
        pm = ps = float("nan")
    bias, lo, hi = bland_altman(sample)
    return AgreementReport(sample.label, len(sample), r, pm, ps, bias, lo, hi, excluded)


def collect_samples(oracle, synth, masks=None) -> dict[str, PairedSample]:
    """Per-mask paired samples from one oracle/synth pair (whole map if no masks)."""
    o = np.asarray(getattr(oracle, "values", oracle))
    s = np.asarray(getattr(synth, "values", synth))
    if o.shape != s.shape:
        raise InvalidInputError(f"oracle {o.shape} and synthesized {s.shape} maps differ in shape")
    if not masks:
        masks = [RoiMask(np.ones(o.shape, dtype=bool), "all")]
    out = {}
    for m in masks:
        out[m.label] = PairedSample(roi_extract(o, m), roi_extract(s, m), m.label)
    return out


def merge_samples(parts: list[dict[str, PairedSample]]) -> dict[str, PairedSample]:
    """Concatenate same-label samples across images, keeping first-seen label order."""
    acc: dict[str, tuple[list, list]] = {}
    for part in parts:
        for label, s in part.items():
            ref, tst = acc.setdefault(label, ([], []))
            ref.append(s.reference)
            tst.append(s.test)
    return {k: PairedSample(np.concatenate(r), np.concatenate(t), k) for k, (r, t) in acc.items()}


def pooled(samples: dict[str, PairedSample], label="pooled") -> PairedSample:
    ref = np.concatenate([s.reference for s in samples.values()])
    tst = np.concatenate([s.test for s in samples.values()])
    return PairedSample(ref, tst, label)


def reports_from_samples(samples: dict[str, PairedSample], exclude_below=1e-9):
    """One report per label plus a pooled report (last)."""
    reports = [report_for(s, exclude_below) for s in samples.values()]
    reports.append(report_for(pooled(samples), exclude_below))
    return reports


def agreement_report(oracle: FeatureMap, synth: FeatureMap, masks=None, exclude_below=1e-9):
    """Reports (one per mask, then pooled) and the samples behind them."""
    samples = collect_samples(oracle, synth, masks)
    return reports_from_samples(samples, exclude_below), samples


def report_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def plot_csv(samples: dict[str, PairedSample]) -> str:
    """Scatter (oracle vs synth) and Bland-Altman (mean vs difference) points."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_FIELDS)
    for label, s in samples.items():
        mean = (s.reference + s.test) / 2.0
        diff = s.reference - s.test
        for row in zip(s.reference, s.test, mean, diff):
            w.writerow([label] + [repr(float(v)) for v in row])
    return buf.getvalue()
