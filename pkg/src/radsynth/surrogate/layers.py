"""Layers of the patch-regression CNN, NHWC layout, numpy only.

Each layer caches what its backward pass needs during a training-mode
forward call. ``backward`` takes the gradient of the loss with respect to
the layer output and returns the gradient with respect to its input,
filling ``self.grads`` for any trainable parameter.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, UninitializedStatsError
from ..rng import Stream
from ._kernels import channel_moments, maxpool_backward, maxpool_forward


def _channel_sum(x):
    """Sum over every axis but the last (a BLAS matvec, much faster than ``sum``)."""
    x2 = x.reshape(-1, x.shape[-1])
    return np.ones(x2.shape[0], dtype=x2.dtype) @ x2


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def output_shape(self, shape):
        return shape

    def __repr__(self):
        return f"{type(self).__name__}()"


class Conv2D(Layer):
    """3x3 cross-correlation with zero 'same' padding."""

    kind = "conv"

    def __init__(self, in_channels, filters, dtype=np.float32):
        super().__init__()
        self.in_channels = in_channels
        self.filters = filters
        self.params["weight"] = np.zeros((3, 3, in_channels, filters), dtype=dtype)
        self.params["bias"] = np.zeros(filters, dtype=dtype)
        self.input_grad = True
        self._cols = None
        self._shape = None

    def init_weights(self, stream: Stream):
        fan_in = 9 * self.in_channels
        w = stream.normal(self.params["weight"].shape) * np.sqrt(2.0 / fan_in)
        self.params["weight"] = w.astype(self.params["weight"].dtype)
        self.params["bias"][:] = 0

    def output_shape(self, shape):
        h, w, c = shape
        if c != self.in_channels:
            raise ShapeError(f"conv expects {self.in_channels} channels, got {c}")
        return (h, w, self.filters)

    def forward(self, x, training=False, rng=None):
        if x.ndim != 4 or x.shape[3] != self.in_channels:
            raise ShapeError(
                f"conv{self.filters}: expected (B, H, W, {self.in_channels}) input, "
                f"got {x.shape}"
            )
        b, h, w, c = x.shape
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        cols = np.stack(
            [xp[:, i : i + h, j : j + w, :] for i in range(3) for j in range(3)], axis=3
        ).reshape(b * h * w, 9 * c)
        wm = self.params["weight"].reshape(9 * c, self.filters)
        out = cols @ wm + self.params["bias"]
        if training:
            self._cols = cols
            self._shape = x.shape
        return out.reshape(b, h, w, self.filters)

    def backward(self, grad):
        b, h, w, c = self._shape
        g = grad.reshape(b * h * w, self.filters)
        self.grads["weight"] = (self._cols.T @ g).reshape(3, 3, c, self.filters)
        self.grads["bias"] = g.sum(axis=0)
        self._cols = None
        if not self.input_grad:
            return None
        wm = self.params["weight"].reshape(9 * c, self.filters)
        dcols = (g @ wm.T).reshape(b, h, w, 9, c)
        dxp = np.zeros((b, h + 2, w + 2, c), dtype=grad.dtype)
        for k in range(9):
            i, j = divmod(k, 3)
            dxp[:, i : i + h, j : j + w, :] += dcols[:, :, :, k, :]
        return dxp[:, 1:-1, 1:-1, :]

    def __repr__(self):
        return f"Conv2D({self.in_channels}->{self.filters}, 3x3, same)"


class BatchNorm(Layer):
    """Per-channel batch normalization over every axis but the last."""

    kind = "batchnorm"

    def __init__(self, channels, eps=1e-5, momentum=0.1, dtype=np.float32):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.stats_recorded = False
        self._cache = None

    def set_running_stats(self, mean, var):
        var = np.asarray(var, dtype=self.running_var.dtype)
        if np.any(var <= 0):
            raise ValueError("running variance must be positive")
        self.running_mean = np.asarray(mean, dtype=self.running_mean.dtype).copy()
        self.running_var = var.copy()
        self.stats_recorded = True

    def forward(self, x, training=False, rng=None):
        if x.shape[-1] != self.channels:
            raise ShapeError(
                f"batchnorm expects {self.channels} channels, got {x.shape[-1]}"
            )
        gamma, beta = self.params["gamma"], self.params["beta"]
        if not training:
            if not self.stats_recorded:
                raise UninitializedStatsError(
                    "batchnorm running statistics were never recorded; "
                    "train the model or set them explicitly"
                )
            inv = 1.0 / np.sqrt(self.running_var + self.eps)
            return ((x - self.running_mean) * inv * gamma + beta).astype(x.dtype)

        n = x.size // self.channels
        # statistics accumulate in float64
        mean, var = channel_moments(x.reshape(-1, self.channels))
        xc = x - mean.astype(x.dtype)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = xc * inv.astype(x.dtype)
        m = self.momentum
        unbiased = var * n / max(n - 1, 1)
        dt = self.running_mean.dtype
        self.running_mean = ((1 - m) * self.running_mean + m * mean).astype(dt)
        self.running_var = ((1 - m) * self.running_var + m * unbiased).astype(dt)
        self.stats_recorded = True
        self._cache = (xhat, inv.astype(x.dtype), n)
        return xhat * gamma + beta

    def backward(self, grad):
        xhat, inv, n = self._cache
        self._cache = None
        gb = _channel_sum(grad)
        gg = _channel_sum(grad * xhat)
        self.grads["beta"] = gb
        self.grads["gamma"] = gg
        gamma = self.params["gamma"]
        dx = xhat * (gg / n)
        np.subtract(grad, dx, out=dx)
        dx -= gb / n
        dx *= gamma * inv
        return dx

    def __repr__(self):
        return f"BatchNorm({self.channels})"


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training=False, rng=None):
        if training:
            self._mask = x > 0
        return np.maximum(x, x.dtype.type(0))

    def backward(self, grad):
        # subgradient at 0 is 0
        mask, self._mask = self._mask, None
        return np.multiply(grad, mask)


class MaxPool2x2(Layer):
    """Non-overlapping 2x2 max, stride 2, trailing odd row/column dropped."""

    kind = "maxpool"

    def output_shape(self, shape):
        h, w, c = shape
        if h < 2 or w < 2:
            raise ShapeError(f"maxpool needs spatial size >= 2, got {h}x{w}")
        return (h // 2, w // 2, c)

    def forward(self, x, training=False, rng=None):
        b, h, w, c = x.shape
        h2, w2, _ = self.output_shape((h, w, c))
        out = np.empty((b, h2, w2, c), dtype=x.dtype)
        idx = np.empty((b, h2, w2, c), dtype=np.int8)
        # first occurrence wins on ties
        maxpool_forward(np.ascontiguousarray(x), out, idx)
        if training:
            self._cache = (idx, x.shape)
        return out

    def backward(self, grad):
        idx, shape = self._cache
        self._cache = None
        dx = np.zeros(shape, dtype=grad.dtype)
        maxpool_backward(np.ascontiguousarray(grad), idx, dx)
        return dx


class Dropout(Layer):
    """Inverted dropout; identity outside training."""

    kind = "dropout"

    def __init__(self, rate=0.2):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._scale = None

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            self._scale = None
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs a random stream")
        keep = rng.uniform(x.shape) >= self.rate
        self._scale = (keep / (1.0 - self.rate)).astype(x.dtype)
        return x * self._scale

    def backward(self, grad):
        scale, self._scale = self._scale, None
        return grad if scale is None else grad * scale

    def __repr__(self):
        return f"Dropout({self.rate})"


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x, training=False, rng=None):
        if training:
            self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features, out_features=1, dtype=np.float32):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.params["weight"] = np.zeros((in_features, out_features), dtype=dtype)
        self.params["bias"] = np.zeros(out_features, dtype=dtype)

    def init_weights(self, stream: Stream):
        w = stream.normal(self.params["weight"].shape) * np.sqrt(2.0 / self.in_features)
        self.params["weight"] = w.astype(self.params["weight"].dtype)
        self.params["bias"][:] = 0

    def output_shape(self, shape):
        if shape != (self.in_features,):
            raise ShapeError(f"dense expects {self.in_features} features, got {shape}")
        return (self.out_features,)

    def forward(self, x, training=False, rng=None):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"dense expects (B, {self.in_features}), got {x.shape}")
        if training:
            self._x = x
        return x @ self.params["weight"] + self.params["bias"]

    def backward(self, grad):
        x, self._x = self._x, None
        self.grads["weight"] = x.T @ grad
        self.grads["bias"] = grad.sum(axis=0)
        return grad @ self.params["weight"].T

    def __repr__(self):
        return f"Dense({self.in_features}->{self.out_features})"


def relu(x):
    """Elementwise max(x, 0) with f(0) = 0."""
    x = np.asarray(x)
    return np.where(x > 0, x, x.dtype.type(0) if x.dtype.kind == "f" else 0)


def conv2d_forward(x, layer: Conv2D):
    return layer.forward(x)


def batchnorm_forward(x, layer: BatchNorm, mode="infer"):
    return layer.forward(x, training=(mode == "train"))


def maxpool2x2(x):
    return MaxPool2x2().forward(x)


def dropout(x, rate=0.2, mode="infer", seed=0):
    return Dropout(rate).forward(x, training=(mode == "train"), rng=Stream(seed))
