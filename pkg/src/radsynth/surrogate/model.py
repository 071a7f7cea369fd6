"""The RadSynth layer stack and its forward/backward driver."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..rng import Stream
from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool2x2,
    ReLU,
)

RADSYNTH_FILTERS = (128, 64, 32, 16)
POOL_AFTER = (0, 1)  # pool after the first and second conv blocks
DROPOUT_RATE = 0.2


class CnnModel:
    """Ordered layer stack mapping (B, P, P, 1) patches to B predictions.

    Parameters
    ----------
    layers : list of Layer
    patch_size : int
        Spatial size of the square input patch.
    g : int
        Gray-level count the model was built for; inputs are expected as
        ``levels / (g - 1)``.
    seed : int
        Seed the weights were initialised from.
    """

    def __init__(self, layers: list[Layer], patch_size=5, g=64, seed=0):
        self.layers = list(layers)
        self.patch_size = patch_size
        self.g = g
        self.seed = seed
        self.training = False

    @property
    def dtype(self):
        for layer in self.layers:
            for p in layer.params.values():
                return p.dtype
        return np.dtype(np.float32)

    def shape_trace(self, batch_shape=None):
        """Per-layer output shapes (without the batch axis) for one patch."""
        shape = batch_shape or (self.patch_size, self.patch_size, 1)
        trace = []
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.output_shape(shape)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer!r}): {exc}") from None
            trace.append((layer.kind, shape))
        return trace

    def forward(self, x, training=False, rng: Stream | None = None):
        """Predictions of shape (B,); ``training`` caches activations."""
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 3:
            x = x[..., None]
        p = self.patch_size
        if x.shape[1:] != (p, p, 1):
            raise ShapeError(f"expected (B, {p}, {p}, 1) patches, got {x.shape}")
        for i, layer in enumerate(self.layers):
            try:
                x = layer.forward(x, training=training, rng=rng)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer!r}): {exc}") from None
        return x[:, 0]

    def backward(self, grad):
        """Back-propagate d(loss)/d(prediction) through the cached pass."""
        g = np.asarray(grad, dtype=self.dtype)[:, None]
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return self.gradients()

    def parameters(self):
        """(layer index, name, array) for every trainable parameter."""
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                yield i, name, layer.params[name]

    def gradients(self):
        return {(i, name): self.layers[i].grads[name] for i, name, _ in self.parameters()}

    def predict(self, patches, batch_size=4096):
        out = [
            self.forward(patches[s : s + batch_size], training=False)
            for s in range(0, len(patches), batch_size)
        ]
        return np.concatenate(out) if out else np.zeros(0, dtype=self.dtype)

    def astype(self, dtype):
        for layer in self.layers:
            for name in layer.params:
                layer.params[name] = layer.params[name].astype(dtype)
            if isinstance(layer, BatchNorm):
                layer.running_mean = layer.running_mean.astype(dtype)
                layer.running_var = layer.running_var.astype(dtype)
        return self

    def __repr__(self):
        body = ", ".join(repr(layer) for layer in self.layers)
        return f"CnnModel([{body}])"


def build_radsynth(
    filters=RADSYNTH_FILTERS,
    patch_size=5,
    g=64,
    seed=0,
    dropout=DROPOUT_RATE,
    dtype=np.float32,
    init=True,
):
    """Four conv/BN/ReLU blocks, 2x2 pools after the first two, dropout, dense(1)."""
    layers: list[Layer] = []
    channels = 1
    size = patch_size
    for block, f in enumerate(filters):
        layers += [Conv2D(channels, f, dtype=dtype), BatchNorm(f, dtype=dtype), ReLU()]
        if block in POOL_AFTER:
            layers.append(MaxPool2x2())
            size //= 2
        channels = f
    layers[0].input_grad = False
    layers += [Dropout(dropout), Flatten(), Dense(size * size * channels, 1, dtype=dtype)]
    model = CnnModel(layers, patch_size=patch_size, g=g, seed=seed)
    model.shape_trace()  # fail early on patches too small for the pools
    if init:
        stream = Stream(seed)
        for layer in layers:
            if hasattr(layer, "init_weights"):
                layer.init_weights(stream)
    return model
