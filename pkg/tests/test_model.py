"""Network core: spec validation, forward pass semantics, serialization."""

import numpy as np
import pytest

from advscope.errors import FormatError, InvalidInputError
from advscope.nn.io import load_model, save_model
from advscope.nn.model import (
    Model,
    forward,
    forward_batch,
    input_gradient,
    log_softmax,
    mininet,
    softmax,
)


@pytest.fixture(scope="module")
def small_model():
    return Model.create(mininet(class_count=4), seed=3)


def test_mininet_shapes():
    spec = mininet(class_count=4)
    assert spec.neuron_count == 64
    assert spec.feature_map_size == (8, 8)
    assert spec.input_shape == (32, 32, 3)


def test_softmax_properties(rng):
    logits = rng.standard_normal((10, 6)) * 30
    p = softmax(logits)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    # shift invariance
    np.testing.assert_allclose(p, softmax(logits + 100.0), atol=1e-12)
    np.testing.assert_allclose(np.log(p), log_softmax(logits), atol=1e-9)


def test_softmax_extreme_logits_stay_finite():
    p = softmax(np.array([1e4, -1e4, 0.0]))
    assert np.isfinite(p).all() and abs(p.sum() - 1) < 1e-12


def test_forward_trace_consistency(small_model, rng):
    image = rng.uniform(0, 1, (32, 32, 3)).astype(np.float32)
    t = forward(small_model, image)
    assert t.last_conv_maps.shape == (64, 8, 8)
    assert t.pooled.shape == (64,)
    # pooled is the global average of the (ReLU'd, hence nonnegative) maps
    assert (t.last_conv_maps >= 0).all()
    np.testing.assert_allclose(
        t.pooled, t.last_conv_maps.mean(axis=(1, 2), dtype=np.float64), atol=1e-6
    )
    np.testing.assert_allclose(
        t.logits,
        t.pooled @ small_model.dense_weights.T + small_model.dense_bias,
        atol=1e-5,
    )
    assert t.predicted_label == int(np.argmax(t.logits))


def test_forward_batch_matches_single(small_model, rng):
    images = rng.uniform(0, 1, (5, 32, 32, 3)).astype(np.float32)
    batch = forward_batch(small_model, images)
    for i in range(5):
        single = forward(small_model, images[i])
        np.testing.assert_allclose(batch.logits[i], single.logits, atol=1e-5)


def test_forward_deterministic(small_model, rng):
    image = rng.uniform(0, 1, (32, 32, 3)).astype(np.float32)
    a = forward(small_model, image)
    b = forward(small_model, image)
    np.testing.assert_array_equal(a.logits, b.logits)


def test_forward_rejects_bad_input(small_model):
    with pytest.raises(InvalidInputError):
        forward(small_model, np.zeros((16, 16, 3), dtype=np.float32))
    with pytest.raises(InvalidInputError):
        forward(small_model, np.full((32, 32, 3), np.nan, dtype=np.float32))


def test_input_gradient_shape_and_direction(small_model, rng):
    image = rng.uniform(0.2, 0.8, (32, 32, 3)).astype(np.float32)
    g = input_gradient(small_model, image, 0)
    assert g.shape == image.shape
    # a small step along the CE gradient increases the loss
    t0 = forward(small_model, image)
    step = np.sign(g) * 1e-3
    t1 = forward(small_model, np.clip(image + step, 0, 1).astype(np.float32))
    loss0 = -np.log(t0.probabilities[0])
    loss1 = -np.log(t1.probabilities[0])
    assert loss1 >= loss0 - 1e-6


def test_astype_roundtrip(small_model):
    m64 = small_model.astype(np.float64)
    assert m64.dtype == np.float64
    image = np.full((32, 32, 3), 0.5)
    t64 = forward(m64, image)
    t32 = forward(small_model, image.astype(np.float32))
    np.testing.assert_allclose(t64.logits, t32.logits, atol=1e-3)


def test_model_copy_is_deep(small_model):
    clone = small_model.copy()
    clone.params[0]["w"][0, 0, 0, 0] += 1.0
    assert small_model.params[0]["w"][0, 0, 0, 0] != clone.params[0]["w"][0, 0, 0, 0]


def test_save_load_roundtrip(tmp_path, small_model, rng):
    path = tmp_path / "m.mnet"
    save_model(small_model, path)
    loaded = load_model(path)
    image = rng.uniform(0, 1, (32, 32, 3)).astype(np.float32)
    np.testing.assert_array_equal(
        forward(small_model, image).logits, forward(loaded, image).logits
    )


def test_load_rejects_bad_magic(tmp_path, small_model):
    path = tmp_path / "m.mnet"
    save_model(small_model, path)
    raw = bytearray(path.read_bytes())
    raw[0] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        load_model(path)


def test_load_rejects_truncation(tmp_path, small_model):
    path = tmp_path / "m.mnet"
    save_model(small_model, path)
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(FormatError):
        load_model(path)


def test_load_rejects_nonfinite_blob(tmp_path, small_model):
    bad = small_model.copy()
    bad.params[0]["w"][0, 0, 0, 0] = np.nan
    path = tmp_path / "m.mnet"
    save_model(bad, path)
    with pytest.raises(FormatError):
        load_model(path)
