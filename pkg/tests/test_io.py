import os

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from radsynth.errors import ConfigError, ParseError
from radsynth.glcm import FeatureMap
from radsynth.image_core import GrayImage, QuantizedImage, RoiMask
from radsynth.io import (
    atomic_write,
    read_image,
    read_map,
    read_mask,
    read_quantized,
    write_image,
    write_map,
    write_mask,
    write_quantized,
)


def test_read_ascii_pgm(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P2 2 2 255\n0 64 128 255\n")
    img = read_image(p)
    assert img.pixels.tolist() == [[0, 64], [128, 255]]


def test_pgm_comments_and_16bit(tmp_path):
    p = tmp_path / "b.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n# max\n1000\n" + bytes([0x03, 0xE8, 0x00, 0x07]))
    assert read_image(p).pixels.tolist() == [[1000, 7]]


@pytest.mark.parametrize("binary", [True, False])
def test_gray_round_trip(tmp_path, binary):
    img = GrayImage(np.arange(12).reshape(3, 4) * 300)
    write_image(img, tmp_path / "x.pgm", binary=binary)
    assert read_image(tmp_path / "x.pgm") == img


def test_write_image_rejects_fractional(tmp_path):
    with pytest.raises(ConfigError):
        write_image(GrayImage([[0.5, 1.0]]), tmp_path / "x.pgm")


@pytest.mark.parametrize("data", [
    b"P5\n4 4\n255\n\x00\x01",
    b"P2\n2 2\n255\n1 2 3",
    b"P5\n4 4",
    b"XX\n1 1\n1\n0",
])
def test_truncated_or_bad_pgm(tmp_path, data):
    p = tmp_path / "t.pgm"
    p.write_bytes(data)
    with pytest.raises(ParseError):
        read_image(p)


def test_parse_error_reports_offset(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P2\n2 1\n9\n1 12\n")
    with pytest.raises(ParseError) as info:
        read_image(p)
    assert info.value.offset is not None
    assert "byte offset" in str(info.value)


def test_quantized_round_trip_and_g_check(tmp_path):
    q = QuantizedImage(np.arange(20).reshape(4, 5) % 64, 64)
    write_quantized(q, tmp_path / "q.pgm")
    assert read_quantized(tmp_path / "q.pgm") == q
    assert read_quantized(tmp_path / "q.pgm", 64) == q
    with pytest.raises(ConfigError):
        read_quantized(tmp_path / "q.pgm", 32)


def test_fmap_layout(tmp_path):
    write_map(FeatureMap(np.array([[1.5, 2.0, -0.25]])), tmp_path / "m.fmap")
    raw = (tmp_path / "m.fmap").read_bytes()
    assert raw[:16] == b"FMAP" + (1).to_bytes(4, "little") + (1).to_bytes(4, "little") \
        + (3).to_bytes(4, "little")
    assert np.frombuffer(raw[16:], "<f4").tolist() == [1.5, 2.0, -0.25]


@pytest.mark.parametrize("cut", [3, 15, 17, 27])
def test_fmap_truncated(tmp_path, cut):
    write_map(FeatureMap(np.ones((2, 2))), tmp_path / "m.fmap")
    data = (tmp_path / "m.fmap").read_bytes()
    (tmp_path / "m.fmap").write_bytes(data[:cut])
    with pytest.raises(ParseError):
        read_map(tmp_path / "m.fmap")


def test_fmap_bad_magic_and_trailing(tmp_path):
    write_map(FeatureMap(np.ones((2, 2))), tmp_path / "m.fmap")
    data = (tmp_path / "m.fmap").read_bytes()
    (tmp_path / "bad.fmap").write_bytes(b"FMAQ" + data[4:])
    (tmp_path / "long.fmap").write_bytes(data + b"\0")
    for name in ("bad.fmap", "long.fmap"):
        with pytest.raises(ParseError):
            read_map(tmp_path / name)


@pytest.mark.parametrize("suffix", [".pbm", ".fmap"])
def test_mask_round_trip(tmp_path, suffix):
    flags = np.zeros((5, 11), dtype=bool)
    flags[1:4, 2:9] = True
    write_mask(RoiMask(flags, "lesion"), tmp_path / f"lesion{suffix}")
    m = read_mask(tmp_path / f"lesion{suffix}")
    assert m == RoiMask(flags) and m.label == "lesion"


def test_ascii_pbm(tmp_path):
    (tmp_path / "m.pbm").write_bytes(b"P1\n3 2\n1 0 1\n011\n")
    assert read_mask(tmp_path / "m.pbm").flags.tolist() == [[True, False, True],
                                                            [False, True, True]]


def test_atomic_write_leaves_no_temp(tmp_path):
    atomic_write(tmp_path / "sub" / "f.txt", "hello\n")
    assert os.listdir(tmp_path / "sub") == ["f.txt"]

    with pytest.raises(TypeError):
        atomic_write(tmp_path / "sub" / "g.txt", 12)
    assert os.listdir(tmp_path / "sub") == ["f.txt"]


@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_fmap_round_trip_float32(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("fm") / "v.fmap"
    write_map(FeatureMap(values), path)
    np.testing.assert_array_equal(read_map(path).values, values.astype(np.float32))


@given(arrays(np.int32, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.integers(0, 299)),
       st.booleans())
def test_quantized_round_trip_property(tmp_path_factory, levels, binary):
    path = tmp_path_factory.mktemp("q") / "q.pgm"
    q = QuantizedImage(levels, 300)
    write_quantized(q, path, binary=binary)
    assert read_quantized(path, 300) == q


@given(arrays(bool, st.tuples(st.integers(1, 9), st.integers(1, 20))))
def test_mask_round_trip_property(tmp_path_factory, flags):
    path = tmp_path_factory.mktemp("m") / "m.pbm"
    write_mask(RoiMask(flags), path)
    assert read_mask(path) == RoiMask(flags)
