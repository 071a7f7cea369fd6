import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from radsynth.errors import InvalidInputError
from radsynth.image_core import (
    GrayImage,
    QuantizedImage,
    RoiMask,
    extract_patches,
    quantize,
    replicate_pad,
)


def test_quantize_constant_is_zero():
    q = quantize(GrayImage(np.full((4, 5), 3.7)), 16)
    assert q.g == 16
    assert np.all(q.levels == 0)


def test_quantize_hand_example():
    q = quantize(GrayImage([[0.0, 5.0, 10.0]]), 4)
    assert q.levels.tolist() == [[0, 2, 3]]


def test_quantize_endpoints():
    q = quantize(GrayImage([[-3.5, 11.25]]), 64)
    assert q.levels.tolist() == [[0, 63]]


def test_gray_image_rejects_nonfinite():
    with pytest.raises(InvalidInputError):
        GrayImage([[1.0, np.nan]])
    with pytest.raises(InvalidInputError):
        GrayImage(np.zeros((0, 3)))


def test_quantized_image_validates_levels():
    with pytest.raises(InvalidInputError):
        QuantizedImage([[0, 4]], 4)
    with pytest.raises(InvalidInputError):
        QuantizedImage([[0, 1]], 1)
    with pytest.raises(InvalidInputError):
        QuantizedImage([[0.5, 1]], 4)


def test_containers_are_read_only():
    q = QuantizedImage([[0, 1], [2, 3]], 4)
    with pytest.raises(ValueError):
        q.levels[0, 0] = 3


def test_replicate_pad_examples():
    q = QuantizedImage([[1, 2], [3, 4]], 8)
    assert replicate_pad(q, 0) == q
    one = replicate_pad(QuantizedImage([[7]], 8), 2)
    assert one.shape == (5, 5) and np.all(one.levels == 7)
    p = replicate_pad(q, 1).levels
    assert p.tolist() == [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]]


def test_extract_patches_counts_and_centers():
    q = QuantizedImage(np.arange(25).reshape(5, 5) % 8, 8)
    ps = extract_patches(q, 5)
    assert len(ps) == 25
    assert ps.patches.shape == (25, 5, 5)
    assert ps.centers[7].tolist() == [1, 2]
    np.testing.assert_array_equal(ps.patches[12], q.levels)


def test_extract_patches_constant_image():
    ps = extract_patches(QuantizedImage(np.full((6, 7), 3), 4), 5)
    assert np.all(ps.patches == 3)


def test_extract_patches_exact_fit():
    q = QuantizedImage(np.arange(9).reshape(3, 3), 9)
    ps = extract_patches(q, 3)
    np.testing.assert_array_equal(ps.patches[4], q.levels)


def test_extract_patches_targets_and_errors():
    q = QuantizedImage(np.zeros((5, 6), dtype=int), 4)
    labels = np.arange(30, dtype=float).reshape(5, 6)
    ps = extract_patches(q, 3, labels)
    np.testing.assert_array_equal(ps.targets, labels.ravel())
    with pytest.raises(InvalidInputError):
        extract_patches(q, 4)
    with pytest.raises(InvalidInputError):
        extract_patches(q, 3, np.zeros((4, 6)))
    with pytest.raises(InvalidInputError):
        extract_patches(q, 7)


def test_roi_mask_count():
    m = RoiMask([[True, False], [True, True]], "lesion")
    assert m.count == 3 and m.label == "lesion"


images = arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)),
                elements=st.floats(-1e3, 1e3, allow_nan=False))


@given(images, st.integers(2, 256))
def test_quantize_monotone_and_range(px, g):
    q = quantize(GrayImage(px), g).levels.ravel()
    order = np.argsort(px.ravel(), kind="stable")
    assert np.all(np.diff(q[order]) >= 0)
    assert q.min() >= 0 and q.max() < g
    if px.max() > px.min():
        assert q.min() == 0 and q.max() == g - 1


@given(arrays(np.int32, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.integers(0, 15)),
       st.integers(0, 4))
def test_replicate_pad_interior(levels, m):
    q = QuantizedImage(levels, 16)
    p = replicate_pad(q, m).levels
    assert p.shape == (levels.shape[0] + 2 * m, levels.shape[1] + 2 * m)
    np.testing.assert_array_equal(p[m : m + levels.shape[0], m : m + levels.shape[1]], levels)
