import math

import numpy as np
import pytest

from radsynth.errors import DomainError, InvalidInputError
from radsynth.eval import (
    PLOT_FIELDS,
    REPORT_FIELDS,
    PairedSample,
    agreement_report,
    bland_altman,
    percentage_difference,
    pearson,
    plot_csv,
    report_csv,
    roi_extract,
)
from radsynth.glcm import FeatureMap
from radsynth.image_core import RoiMask


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == 1.0
    assert pearson([1, 2, 3], [3, 2, 1]) == -1.0
    assert pearson([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6, abs=1e-12)


def test_pearson_constant_is_domain_error():
    with pytest.raises(DomainError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(DomainError):
        pearson([1, 2, 3], [5, 5, 5])


def test_percentage_difference_examples():
    assert percentage_difference([2, 4], [1, 5]) == pytest.approx((0.375, 0.125), abs=1e-12)
    assert percentage_difference([1, 2, 3], [1, 2, 3]) == (0.0, 0.0)
    with pytest.raises(DomainError, match="indices 1"):
        percentage_difference([1, 0, 3], [1, 2, 3])


def test_bland_altman_examples():
    assert bland_altman([1, 2, 3], [2, 3, 4]) == pytest.approx((-1, -1, -1), abs=1e-12)
    assert bland_altman([1, 5, 2], [1, 5, 2]) == (0.0, 0.0, 0.0)
    bias, lo, hi = bland_altman([0, 0, 0, 0], [1, -1, 1, -1])
    assert (bias, lo, hi) == pytest.approx((0, -1.96, 1.96))


def test_sample_validation():
    with pytest.raises(InvalidInputError):
        PairedSample([1, 2], [1, 2, 3])
    with pytest.raises(InvalidInputError):
        PairedSample([1], [1])
    with pytest.raises(InvalidInputError):
        PairedSample([1, np.nan], [1, 2])


def test_roi_extract():
    m = np.arange(12.0).reshape(3, 4)
    assert roi_extract(m, RoiMask(np.ones((3, 4)))).tolist() == m.ravel().tolist()
    one = np.zeros((3, 4), bool)
    one[2, 1] = True
    assert roi_extract(FeatureMap(m), RoiMask(one)).tolist() == [9.0]
    left = np.zeros((3, 4), bool)
    left[:, :2] = True
    parts = np.concatenate([roi_extract(m, RoiMask(left)), roi_extract(m, RoiMask(~left))])
    assert sorted(parts.tolist()) == m.ravel().tolist()
    with pytest.raises(InvalidInputError):
        roi_extract(m, RoiMask(np.zeros((3, 4))))
    with pytest.raises(InvalidInputError):
        roi_extract(m, RoiMask(np.ones((2, 4))))


def test_identical_maps_report():
    o = np.arange(20.0).reshape(4, 5) + 1
    flat = np.zeros((4, 5), bool)
    flat[0, :2] = True
    o[0, :2] = 3.0
    reports, samples = agreement_report(FeatureMap(o), FeatureMap(o),
                                        [RoiMask(~flat, "tissue"), RoiMask(flat, "flat")])
    tissue, flat_r, pooled = reports
    assert tissue.pearson_r == 1.0 and tissue.pct_diff_mean == 0.0
    assert (tissue.ba_bias, tissue.ba_loa_low, tissue.ba_loa_high) == (0.0, 0.0, 0.0)
    assert math.isnan(flat_r.pearson_r)
    assert pooled.label == "pooled" and pooled.n == 20


def test_report_excludes_zero_references():
    o = np.array([[0.0, 1.0, 2.0, 4.0]])
    s = np.array([[0.5, 1.0, 1.0, 5.0]])
    (rep, _), _ = agreement_report(o, s)
    assert rep.excluded == 1
    assert rep.pct_diff_mean == pytest.approx((0 + 0.5 + 0.25) / 3)


def test_csv_headers():
    o = np.arange(1.0, 7.0).reshape(2, 3)
    reports, samples = agreement_report(o, o * 1.1)
    rep = report_csv(reports).splitlines()
    assert rep[0] == ",".join(REPORT_FIELDS)
    assert len(rep) == 3
    plot = plot_csv(samples).splitlines()
    assert plot[0] == ",".join(PLOT_FIELDS)
    assert len(plot) == 7
    label, ov, sv, mean, diff = plot[1].split(",")
    assert float(mean) == pytest.approx((float(ov) + float(sv)) / 2)
    assert float(diff) == pytest.approx(float(ov) - float(sv))


def test_loa_coverage_for_normal_differences():
    rng = np.random.default_rng(5)
    ref = rng.uniform(1, 3, 5000)
    test = ref + rng.normal(0.1, 0.2, 5000)
    _, lo, hi = bland_altman(ref, test)
    d = ref - test
    assert np.mean((d >= lo) & (d <= hi)) >= 0.90
