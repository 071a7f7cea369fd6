"""PGM/PBM readers and writers plus the FMAP float map format.

FMAP layout (all little-endian)::

    b"FMAP"  u32 version(=1)  u32 height  u32 width  f32[height*width] row-major

All writers go through a temp file and ``os.replace`` so an interrupted
run never leaves a half-written file under the final name.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import ConfigError, ParseError
from .glcm import FeatureMap
from .image_core import GrayImage, QuantizedImage, RoiMask

FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1
_FMAP_HEADER = struct.Struct("<4sIII")


def atomic_write(path, data: bytes | str):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


# -- netpbm -------------------------------------------------------------------

class _Tokens:
    """Header tokenizer for netpbm files; skips whitespace and # comments."""

    def __init__(self, data: bytes, pos=0):
        self.data = data
        self.pos = pos

    def next(self, what):
        d, n = self.data, len(self.data)
        while self.pos < n:
            ch = d[self.pos : self.pos + 1]
            if ch == b"#":
                while self.pos < n and d[self.pos : self.pos + 1] not in (b"\n", b"\r"):
                    self.pos += 1
            elif ch.isspace():
                self.pos += 1
            else:
                break
        start = self.pos
        while self.pos < n and not d[self.pos : self.pos + 1].isspace() and d[self.pos : self.pos + 1] != b"#":
            self.pos += 1
        if start == self.pos:
            raise ParseError(f"unexpected end of file while reading {what}", start)
        tok = d[start : self.pos]
        return tok, start

    def next_int(self, what, lo=0, hi=None):
        tok, at = self.next(what)
        try:
            v = int(tok)
        except ValueError:
            raise ParseError(f"{what} is not an integer: {tok[:16]!r}", at) from None
        if v < lo or (hi is not None and v > hi):
            raise ParseError(f"{what} {v} out of range", at)
        return v


def _read_netpbm(path):
    """Returns (magic, height, width, maxval, array)."""
    data = _read_bytes(path)
    if len(data) < 2 or data[:1] != b"P" or data[1:2] not in b"1245":
        raise ParseError(f"{path}: not a PGM/PBM file (bad magic)", 0)
    magic = data[:2].decode()
    tok = _Tokens(data, 2)
    width = tok.next_int("width", 1)
    height = tok.next_int("height", 1)
    maxval = 1
    if magic in ("P2", "P5"):
        maxval = tok.next_int("maxval", 1, 65535)
    n = height * width

    if magic in ("P2", "P1"):
        values = np.empty(n, dtype=np.int64)
        for k in range(n):
            if magic == "P1":
                # P1 pixels may be packed without separators
                while tok.pos < len(data):
                    ch = data[tok.pos : tok.pos + 1]
                    if ch == b"#":
                        while tok.pos < len(data) and data[tok.pos : tok.pos + 1] != b"\n":
                            tok.pos += 1
                    elif ch.isspace():
                        tok.pos += 1
                    else:
                        break
                if tok.pos >= len(data):
                    raise ParseError(f"{path}: truncated raster, expected {n} pixels", tok.pos)
                ch = data[tok.pos : tok.pos + 1]
                if ch not in (b"0", b"1"):
                    raise ParseError(f"{path}: invalid PBM pixel {ch!r}", tok.pos)
                values[k] = int(ch)
                tok.pos += 1
            else:
                try:
                    values[k] = tok.next_int("pixel", 0, maxval)
                except ParseError as exc:
                    raise ParseError(f"{path}: {exc.detail}", exc.offset) from None
        return magic, height, width, maxval, values.reshape(height, width)

    # binary rasters: exactly one whitespace byte after the header
    if tok.pos >= len(data) or not data[tok.pos : tok.pos + 1].isspace():
        raise ParseError(f"{path}: missing whitespace after header", tok.pos)
    start = tok.pos + 1
    if magic == "P5":
        itemsize = 1 if maxval < 256 else 2
        need = n * itemsize
        if len(data) - start < need:
            raise ParseError(
                f"{path}: truncated raster, expected {need} bytes, found {len(data) - start}",
                len(data),
            )
        dt = np.uint8 if itemsize == 1 else np.dtype(">u2")
        arr = np.frombuffer(data, dtype=dt, count=n, offset=start).astype(np.int64)
        if arr.max() > maxval:
            raise ParseError(f"{path}: pixel exceeds maxval {maxval}", start)
        return magic, height, width, maxval, arr.reshape(height, width)
    # P4: rows packed MSB first, padded to whole bytes
    row_bytes = (width + 7) // 8
    need = row_bytes * height
    if len(data) - start < need:
        raise ParseError(
            f"{path}: truncated raster, expected {need} bytes, found {len(data) - start}",
            len(data),
        )
    packed = np.frombuffer(data, dtype=np.uint8, count=need, offset=start).reshape(height, row_bytes)
    bits = np.unpackbits(packed, axis=1)[:, :width]
    return magic, height, width, 1, bits.astype(np.int64)


def _pgm_bytes(levels: np.ndarray, maxval: int, binary=True) -> bytes:
    h, w = levels.shape
    if binary:
        header = f"P5\n{w} {h}\n{maxval}\n".encode()
        dt = np.uint8 if maxval < 256 else np.dtype(">u2")
        return header + np.ascontiguousarray(levels, dtype=dt).tobytes()
    lines = [f"P2\n{w} {h}\n{maxval}"]
    lines += [" ".join(str(int(v)) for v in row) for row in levels]
    return ("\n".join(lines) + "\n").encode()


def read_image(path, format="pgm") -> GrayImage:
    """Read a P2/P5 PGM as real intensities (the raw sample values)."""
    if format != "pgm":
        raise ConfigError(f"unsupported image format {format!r}")
    magic, h, w, maxval, arr = _read_netpbm(path)
    if magic not in ("P2", "P5"):
        raise ParseError(f"{path}: expected a PGM (P2/P5), found {magic}", 0)
    return GrayImage(arr.astype(np.float64))


def read_pgm_maxval(path):
    return _read_netpbm(path)[3]


def write_image(img: GrayImage, path, maxval=None, binary=True):
    """Write intensities rounded to integers in ``[0, maxval]``."""
    px = img.pixels
    if maxval is None:
        maxval = max(1, int(np.ceil(px.max())))
    if px.min() < 0 or px.max() > maxval or not np.array_equal(px, np.round(px)):
        raise ConfigError("PGM holds integers in [0, maxval]; rescale or quantize first")
    if maxval > 65535:
        raise ConfigError(f"PGM maxval {maxval} exceeds 65535")
    atomic_write(path, _pgm_bytes(px.astype(np.int64), maxval, binary))


def write_quantized(img: QuantizedImage, path, binary=True):
    """PGM with ``maxval = g - 1``; g is therefore recoverable from the file."""
    atomic_write(path, _pgm_bytes(img.levels, img.g - 1, binary))


def read_quantized(path, g=None) -> QuantizedImage:
    magic, h, w, maxval, arr = _read_netpbm(path)
    if magic not in ("P2", "P5"):
        raise ParseError(f"{path}: expected a PGM (P2/P5), found {magic}", 0)
    if g is not None and maxval != g - 1:
        raise ConfigError(f"{path}: PGM maxval {maxval} does not match g={g} (expected {g - 1})")
    return QuantizedImage(arr, maxval + 1)


# -- FMAP -----------------------------------------------------------------------

def fmap_bytes(values: np.ndarray) -> bytes:
    h, w = values.shape
    return _FMAP_HEADER.pack(FMAP_MAGIC, FMAP_VERSION, h, w) + np.ascontiguousarray(
        values, dtype="<f4"
    ).tobytes()


def write_map(fmap: FeatureMap, path):
    atomic_write(path, fmap_bytes(fmap.values))


def _read_fmap_array(path):
    data = _read_bytes(path)
    if len(data) < _FMAP_HEADER.size:
        raise ParseError(f"{path}: truncated FMAP header", len(data))
    magic, version, h, w = _FMAP_HEADER.unpack_from(data)
    if magic != FMAP_MAGIC:
        raise ParseError(f"{path}: bad FMAP magic {magic!r}", 0)
    if version != FMAP_VERSION:
        raise ParseError(f"{path}: unsupported FMAP version {version}", 4)
    if h < 1 or w < 1:
        raise ParseError(f"{path}: empty FMAP dimensions {h}x{w}", 8)
    need = h * w * 4
    have = len(data) - _FMAP_HEADER.size
    if have < need:
        raise ParseError(f"{path}: truncated FMAP payload, expected {need} bytes, found {have}",
                         len(data))
    if have > need:
        raise ParseError(f"{path}: {have - need} trailing bytes after FMAP payload",
                         _FMAP_HEADER.size + need)
    arr = np.frombuffer(data, dtype="<f4", count=h * w, offset=_FMAP_HEADER.size)
    return arr.reshape(h, w).astype(np.float64)


def read_map(path) -> FeatureMap:
    return FeatureMap(_read_fmap_array(path), None, kind="file")


# -- masks ------------------------------------------------------------------------

def write_mask(mask: RoiMask, path, format=None):
    """PBM (P4, 1 = inside) or FMAP with 0.0/1.0, chosen by ``format`` or suffix."""
    format = format or ("fmap" if str(path).endswith(".fmap") else "pbm")
    flags = mask.flags
    if format == "fmap":
        atomic_write(path, fmap_bytes(flags.astype(np.float32)))
        return
    h, w = flags.shape
    packed = np.packbits(flags.astype(np.uint8), axis=1)
    atomic_write(path, f"P4\n{w} {h}\n".encode() + packed.tobytes())


def read_mask(path, label=None) -> RoiMask:
    data = _read_bytes(path)
    label = label or os.path.splitext(os.path.basename(os.fspath(path)))[0]
    if data[:4] == FMAP_MAGIC:
        arr = _read_fmap_array(path)
        if not np.all((arr == 0.0) | (arr == 1.0)):
            raise ParseError(f"{path}: FMAP mask values must be 0.0 or 1.0", 16)
        return RoiMask(arr == 1.0, label)
    magic, h, w, _, arr = _read_netpbm(path)
    if magic not in ("P1", "P4"):
        raise ParseError(f"{path}: expected a PBM (P1/P4) or FMAP mask, found {magic}", 0)
    return RoiMask(arr == 1, label)
