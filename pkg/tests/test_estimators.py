import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from radsynth.errors import ConfigError
from radsynth.estimators import GlcmEntropyMap, RadSynthRegressor
from radsynth.glcm import GlcmParams, entropy_map
from radsynth.image_core import QuantizedImage
from radsynth.rng import Stream


def stack(n=3, size=12, g=16):
    return np.stack([(Stream(i).uniform((size, size)) * g).astype(int) for i in range(n)])


def test_transformer_matches_function():
    X = stack()
    est = GlcmEntropyMap(g=16, window=3)
    maps = est.fit_transform(X)
    assert maps.shape == X.shape
    ref = entropy_map(QuantizedImage(X[1], 16), GlcmParams(g=16, window=3)).values
    np.testing.assert_array_equal(maps[1], ref)
    assert est.transform(X[0]).shape == (1, 12, 12)


def test_transformer_params_and_validation():
    est = GlcmEntropyMap(g=16, offset_dr=1, offset_dc=0, strategy="naive")
    assert est.get_params()["offset_dr"] == 1
    c = clone(est).set_params(window=7)
    assert c.window == 7 and est.window == 5
    with pytest.raises(NotFittedError):
        GlcmEntropyMap().transform(stack())
    with pytest.raises(ValueError):
        GlcmEntropyMap(g=8).fit(stack(g=16))
    with pytest.raises(ConfigError):
        GlcmEntropyMap(window=4).fit(stack(g=64))


def test_regressor_fit_predict_synthesize():
    X = stack(2, 12, 16)
    y_maps = GlcmEntropyMap(g=16).fit_transform(X)
    patches, targets = RadSynthRegressor.patches_from(X[0], labels=y_maps[0], g=16)
    reg = RadSynthRegressor(g=16, filters=(4, 4, 4, 4), epochs=2, minibatch=32, seed=1)
    with pytest.raises(NotFittedError):
        reg.predict(patches)
    reg.fit(patches, targets)
    pred = reg.predict(patches)
    assert pred.shape == (144,) and np.all(np.isfinite(pred))
    flat = reg.predict(patches.reshape(144, 25))
    np.testing.assert_array_equal(flat, pred)
    synth = reg.synthesize(X[1])
    assert synth.shape == (12, 12)
    assert len(reg.history_) == 2
    again = clone(reg).fit(patches, targets).predict(patches)
    np.testing.assert_array_equal(again, pred)
    assert np.isfinite(reg.score(patches, targets))


def test_regressor_rejects_bad_patches():
    reg = RadSynthRegressor(g=16, filters=(2, 2, 2, 2), epochs=1)
    with pytest.raises(ValueError):
        reg.fit(np.zeros((10, 3, 3), int), np.zeros(10))


def test_pipeline_composes():
    X = stack(2, 10, 16)
    pipe = make_pipeline(GlcmEntropyMap(g=16, window=3))
    assert pipe.fit_transform(X).shape == (2, 10, 10)
