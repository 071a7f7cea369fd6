"""Binary model files.

Layout, little-endian throughout::

    b"RSYN"  u32 version(=1)  u32 g  u32 patch_size  u32 layer_count
    then per layer: u32 type tag, followed by

    conv       u32 in_channels, u32 filters, f32 weight[3*3*in*filters]
               (kernel row, kernel col, in channel, filter order), f32 bias[filters]
    batchnorm  u32 channels, f64 eps, f64 momentum, u32 stats_recorded,
               f32 gamma, beta, running_mean, running_var (each [channels])
    dropout    f64 rate
    dense      u32 in, u32 out, f32 weight[in*out], f32 bias[out]
    relu, maxpool, flatten carry no payload
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import ParseError
from ..io import atomic_write
from .layers import BatchNorm, Conv2D, Dense, Dropout, Flatten, MaxPool2x2, ReLU
from .model import CnnModel

MAGIC = b"RSYN"
VERSION = 1
TAGS = {"conv": 1, "batchnorm": 2, "relu": 3, "maxpool": 4, "dropout": 5, "flatten": 6,
        "dense": 7}
_HEADER = struct.Struct("<4sIIII")


def model_bytes(model: CnnModel) -> bytes:
    out = [_HEADER.pack(MAGIC, VERSION, model.g, model.patch_size, len(model.layers))]

    def f32(a):
        out.append(np.ascontiguousarray(a, dtype="<f4").tobytes())

    for layer in model.layers:
        out.append(struct.pack("<I", TAGS[layer.kind]))
        if isinstance(layer, Conv2D):
            out.append(struct.pack("<II", layer.in_channels, layer.filters))
            f32(layer.params["weight"])
            f32(layer.params["bias"])
        elif isinstance(layer, BatchNorm):
            out.append(struct.pack("<IddI", layer.channels, layer.eps, layer.momentum,
                                   int(layer.stats_recorded)))
            for a in (layer.params["gamma"], layer.params["beta"], layer.running_mean,
                      layer.running_var):
                f32(a)
        elif isinstance(layer, Dropout):
            out.append(struct.pack("<d", layer.rate))
        elif isinstance(layer, Dense):
            out.append(struct.pack("<II", layer.in_features, layer.out_features))
            f32(layer.params["weight"])
            f32(layer.params["bias"])
    return b"".join(out)


def save_model(model: CnnModel, path):
    atomic_write(path, model_bytes(model))


class _Reader:
    def __init__(self, data, name):
        self.data = data
        self.pos = 0
        self.name = name

    def unpack(self, fmt, what):
        s = struct.Struct("<" + fmt)
        if self.pos + s.size > len(self.data):
            raise ParseError(f"{self.name}: truncated model file while reading {what}", self.pos)
        vals = s.unpack_from(self.data, self.pos)
        self.pos += s.size
        return vals

    def f32(self, shape, what):
        n = int(np.prod(shape))
        if self.pos + 4 * n > len(self.data):
            raise ParseError(f"{self.name}: truncated model file while reading {what}", self.pos)
        a = np.frombuffer(self.data, dtype="<f4", count=n, offset=self.pos)
        self.pos += 4 * n
        return a.astype(np.float32).reshape(shape)


def model_from_bytes(data: bytes, name="<bytes>") -> CnnModel:
    r = _Reader(data, name)
    magic, version, g, patch_size, count = r.unpack("4sIIII", "header")
    if magic != MAGIC:
        raise ParseError(f"{name}: bad model magic {magic!r}", 0)
    if version != VERSION:
        raise ParseError(f"{name}: unsupported model version {version}", 4)
    layers = []
    for i in range(count):
        at = r.pos
        (tag,) = r.unpack("I", f"layer {i} tag")
        if tag == TAGS["conv"]:
            cin, f = r.unpack("II", "conv shape")
            layer = Conv2D(cin, f)
            layer.params["weight"] = r.f32((3, 3, cin, f), "conv weight")
            layer.params["bias"] = r.f32((f,), "conv bias")
        elif tag == TAGS["batchnorm"]:
            c, eps, mom, recorded = r.unpack("IddI", "batchnorm header")
            layer = BatchNorm(c, eps=eps, momentum=mom)
            layer.params["gamma"] = r.f32((c,), "gamma")
            layer.params["beta"] = r.f32((c,), "beta")
            layer.running_mean = r.f32((c,), "running mean")
            layer.running_var = r.f32((c,), "running var")
            layer.stats_recorded = bool(recorded)
        elif tag == TAGS["relu"]:
            layer = ReLU()
        elif tag == TAGS["maxpool"]:
            layer = MaxPool2x2()
        elif tag == TAGS["dropout"]:
            (rate,) = r.unpack("d", "dropout rate")
            layer = Dropout(rate)
        elif tag == TAGS["flatten"]:
            layer = Flatten()
        elif tag == TAGS["dense"]:
            fin, fout = r.unpack("II", "dense shape")
            layer = Dense(fin, fout)
            layer.params["weight"] = r.f32((fin, fout), "dense weight")
            layer.params["bias"] = r.f32((fout,), "dense bias")
        else:
            raise ParseError(f"{name}: unknown layer tag {tag}", at)
        layers.append(layer)
    if r.pos != len(data):
        raise ParseError(f"{name}: {len(data) - r.pos} trailing bytes", r.pos)
    if layers and isinstance(layers[0], Conv2D):
        layers[0].input_grad = False
    model = CnnModel(layers, patch_size=patch_size, g=g)
    model.shape_trace()
    return model


def load_model(path) -> CnnModel:
    with open(path, "rb") as fh:
        data = fh.read()
    return model_from_bytes(data, str(path))
