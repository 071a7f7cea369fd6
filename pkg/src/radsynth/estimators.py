"""scikit-learn compatible wrappers.

``GlcmEntropyMap`` turns a stack of quantized images into entropy maps and
``RadSynthRegressor`` fits the CNN on (patch, entropy) pairs, so both can sit
in a :class:`sklearn.pipeline.Pipeline` or be cloned by model-selection
utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .glcm import GlcmParams, entropy_map
from .image_core import QuantizedImage, extract_patches
from .rng import Stream, derive_seed
from .surrogate.model import RADSYNTH_FILTERS, build_radsynth
from .surrogate.train import TrainConfig, fit_model, normalize_patches, synthesize_map


def _image_stack(X, g):
    X = check_array(X, allow_nd=True, ensure_2d=False, dtype=None)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"expected one image (H, W) or a stack (n, H, W), got shape {X.shape}")
    if X.dtype.kind not in "iu":
        if not np.array_equal(X, np.round(X)):
            raise ValueError("image levels must be integers")
        X = X.astype(np.int64)
    if X.min() < 0 or X.max() >= g:
        raise ValueError(f"levels must lie in [0, {g})")
    return X


class GlcmEntropyMap(TransformerMixin, BaseEstimator):
    """Per-pixel GLCM entropy of each image in a stack.

    Parameters
    ----------
    g : int, default=64
        Number of gray levels; inputs must hold integer levels in ``[0, g)``.
    window : int, default=5
        Odd sliding-window width.
    offset_dr, offset_dc : int, default=(0, 1)
        Co-occurrence displacement.
    symmetric : bool, default=True
    log_base : {"natural", "base2"}, default="natural"
    strategy : {"incremental", "naive"}, default="incremental"
    threads : int, default=1
    """

    def __init__(self, g=64, window=5, offset_dr=0, offset_dc=1, symmetric=True,
                 log_base="natural", strategy="incremental", threads=1):
        self.g = g
        self.window = window
        self.offset_dr = offset_dr
        self.offset_dc = offset_dc
        self.symmetric = symmetric
        self.log_base = log_base
        self.strategy = strategy
        self.threads = threads

    def _params(self):
        return GlcmParams(self.g, self.window, (self.offset_dr, self.offset_dc), self.symmetric,
                          self.log_base)

    def fit(self, X, y=None):
        self.params_ = self._params()
        _image_stack(X, self.g)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        stack = _image_stack(X, self.g)
        return np.stack([
            entropy_map(QuantizedImage(img, self.g), self.params_, self.strategy,
                        self.threads).values
            for img in stack
        ])


class RadSynthRegressor(RegressorMixin, BaseEstimator):
    """CNN regressor from ``patch_size`` x ``patch_size`` level patches to entropy.

    ``fit`` trains a single model on all rows; use
    :func:`radsynth.surrogate.train.train` for by-image cross-validation.
    """

    def __init__(self, g=64, patch_size=5, filters=RADSYNTH_FILTERS, epochs=50,
                 minibatch=2000, learning_rate=0.01, momentum=0.9, lr_step_epochs=10,
                 lr_decay=0.5, dropout=0.2, seed=7):
        self.g = g
        self.patch_size = patch_size
        self.filters = filters
        self.epochs = epochs
        self.minibatch = minibatch
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.lr_step_epochs = lr_step_epochs
        self.lr_decay = lr_decay
        self.dropout = dropout
        self.seed = seed

    def _patches(self, X):
        p = self.patch_size
        X = check_array(X, allow_nd=True, ensure_2d=False, dtype=None)
        if X.ndim == 2 and X.shape[1] == p * p:
            X = X.reshape(-1, p, p)
        if X.ndim != 3 or X.shape[1:] != (p, p):
            raise ValueError(f"expected patches of shape (n, {p}, {p}) or (n, {p * p})")
        return normalize_patches(X, self.g)

    def fit(self, X, y):
        X, y = check_X_y(X, y, allow_nd=True, dtype=None, y_numeric=True)
        x = self._patches(X)
        config = TrainConfig(minibatch=self.minibatch, epochs=self.epochs,
                             learning_rate=self.learning_rate, momentum=self.momentum,
                             lr_step_epochs=self.lr_step_epochs, lr_decay=self.lr_decay,
                             seed=self.seed, filters=tuple(self.filters), dropout=self.dropout)
        stream = Stream(derive_seed(self.seed, 1))
        model = build_radsynth(config.filters, self.patch_size, self.g,
                               seed=int(stream.bits(1)[0]), dropout=self.dropout)
        self.history_ = fit_model(model, x, np.asarray(y, dtype=np.float64), config, stream)
        self.model_ = model
        self.n_features_in_ = self.patch_size * self.patch_size
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict(self._patches(X)).astype(np.float64)

    def synthesize(self, image):
        """Entropy map of a whole quantized image (array or QuantizedImage)."""
        check_is_fitted(self, "model_")
        if not isinstance(image, QuantizedImage):
            image = QuantizedImage(np.asarray(image), self.g)
        return synthesize_map(self.model_, image).values

    @staticmethod
    def patches_from(image, patch_size=5, labels=None, g=64):
        """Design matrix (and targets) for one image, for use with ``fit``."""
        if not isinstance(image, QuantizedImage):
            image = QuantizedImage(np.asarray(image), g)
        ps = extract_patches(image, patch_size, labels)
        return ps.patches, ps.targets
