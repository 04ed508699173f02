from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from _support import SMALL_DIMS, central_difference_check, forward_oracle, synthetic_dataset
from a11yreviews.classifier import (
    LAYER_DIMS,
    CorruptModelError,
    DimensionError,
    MlpModel,
    ModelVersionError,
    TrainConfig,
    forward,
    init_model,
    load_model,
    loss_and_gradients,
    predict,
    predict_batch,
    save_model,
    softmax,
    train,
)
from a11yreviews.embedding import embed_batch, hash_embedder


def _zero_model(b5=(0.3, -0.3)) -> MlpModel:
    dims = LAYER_DIMS
    weights = [np.zeros((o, i)) for i, o in zip(dims[:-1], dims[1:])]
    biases = [np.zeros(o) for o in dims[1:]]
    biases[-1] = np.array(b5)
    return MlpModel(dims, weights, biases)


def test_init_shapes_and_defaults():
    m = init_model(0)
    assert m.weights[0].shape == (512, 1152)
    assert m.weights[-1].shape == (2, 8)
    assert [b.shape for b in m.biases] == [(512,), (128,), (32,), (8,), (2,)]
    assert all(not b.any() for b in m.biases)
    assert m.prelu_alpha == 0.25


def test_init_bounds():
    m = init_model(7)
    for w, fan_in in zip(m.weights, LAYER_DIMS[:-1]):
        assert np.abs(w).max() <= 1 / math.sqrt(fan_in)


def test_init_deterministic():
    a, b = init_model(3), init_model(3)
    for wa, wb in zip(a.weights, b.weights):
        assert wa.tobytes() == wb.tobytes()
    assert not np.array_equal(init_model(4).weights[0], a.weights[0])


def test_forward_zero_weights():
    np.testing.assert_allclose(forward(_zero_model(), np.ones(1152)), [0.3, -0.3])


def test_forward_dimension_mismatch():
    with pytest.raises(DimensionError):
        forward(init_model(0), np.ones(384))


def test_forward_matches_plain_python_oracle(rng):
    m = init_model(11)
    for b in m.biases:
        b[:] = rng.uniform(-0.1, 0.1, size=b.shape)
    m.prelu_alpha = 0.2
    x = rng.normal(size=1152)
    np.testing.assert_allclose(forward(m, x), forward_oracle(m, x), rtol=0, atol=1e-10)


def test_forward_batch_rows_match_single(rng):
    m = init_model(1)
    xs = rng.normal(size=(5, 1152))
    batch = forward(m, xs)
    for i in range(5):
        np.testing.assert_allclose(batch[i], forward(m, xs[i]), rtol=0, atol=1e-12)


@pytest.mark.parametrize(
    "logits, expected",
    [((0.0, 0.0), (0.5, 0.5)), ((math.log(3), 0.0), (0.75, 0.25)), ((1000.0, 0.0), (1.0, 0.0))],
)
def test_softmax_examples(logits, expected):
    np.testing.assert_allclose(softmax(logits), expected, atol=1e-12)


def test_softmax_rejects_non_finite():
    with pytest.raises(ValueError):
        softmax((math.inf, 0.0))


FINITE = st.floats(-700, 700, allow_nan=False)


@settings(max_examples=300)
@given(FINITE, FINITE, st.floats(-100, 100, allow_nan=False))
def test_softmax_normalized_and_shift_invariant(a, b, c):
    p = softmax((a, b))
    assert abs(p.sum() - 1) <= 1e-9
    np.testing.assert_allclose(softmax((a + c, b + c)), p, atol=1e-9)


@settings(max_examples=200)
@given(FINITE, FINITE, st.floats(1e-3, 1e3))
def test_argmax_invariant_under_positive_scaling(a, b, k):
    # gaps below float resolution make the probability tie round either way
    assume(min(abs(a - b), abs(a * k - b * k)) > 1e-9)
    assert np.argmax(softmax((a, b))) == np.argmax(softmax((a * k, b * k))) == int(b > a)


def test_predict_tie_goes_to_zero():
    pred = predict(_zero_model((0.0, 0.0)), np.zeros(1152))
    assert pred.label == 0 and pred.confidence == 0.5


def test_predict_argmax():
    pred = predict(_zero_model((0.0, math.log(3))), np.zeros(1152))
    assert pred.label == 1
    assert pred.confidence == pytest.approx(0.75)
    assert pred.probabilities == pytest.approx((0.25, 0.75))


def test_confidence_at_least_half(rng):
    m = init_model(2)
    for p in predict_batch(m, rng.normal(size=(200, 1152)) * 5):
        assert 0.5 <= p.confidence <= 1.0
        assert abs(sum(p.probabilities) - 1) <= 1e-9
        assert p.label == int(np.argmax(p.probabilities)) or p.probabilities[0] == p.probabilities[1]


@pytest.mark.parametrize("trial", range(3))
def test_gradients_match_finite_differences(trial):
    assert central_difference_check(trial) < 1e-4


def test_loss_near_ln2_at_init():
    ds = synthetic_dataset(50, seed=0)
    x = embed_batch(hash_embedder(), [r.text for r in ds.reviews])
    loss = loss_and_gradients(init_model(0), x, np.array(ds.labels))[0]
    assert 0.5 <= loss <= 0.9


def test_train_defaults():
    cfg = TrainConfig()
    assert (cfg.epochs, cfg.learning_rate, cfg.batch_size, cfg.val_fraction) == (3, 0.005, 32, 0.1)
    assert (cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon) == (0.9, 0.999, 1e-8)


@pytest.mark.parametrize(
    "kwargs", [{"epochs": 0}, {"learning_rate": 0.0}, {"batch_size": 0}, {"val_fraction": 1.0}]
)
def test_train_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


def _small_problem():
    ds = synthetic_dataset(60, seed=5)
    x = embed_batch(hash_embedder(), [r.text for r in ds.reviews])
    return x, np.array(ds.labels)


def test_train_deterministic_and_leaves_input_untouched():
    x, y = _small_problem()
    start = init_model(9)
    before = start.weights[0].copy()
    m1, h1 = train(start, x, y, TrainConfig(seed=4))
    m2, h2 = train(start, x, y, TrainConfig(seed=4))
    np.testing.assert_array_equal(start.weights[0], before)
    assert h1 == h2
    assert len(h1.train_loss) == len(h1.val_accuracy) == 3
    for a, b in zip(m1.weights + m1.biases, m2.weights + m2.biases):
        assert a.tobytes() == b.tobytes()
    assert m1.prelu_alpha == m2.prelu_alpha != start.prelu_alpha


def test_train_updates_prelu_alpha():
    x, y = _small_problem()
    trained, _ = train(init_model(0), x, y, TrainConfig(epochs=1))
    assert trained.prelu_alpha != 0.25


def test_train_keeps_partial_batch(monkeypatch):
    from a11yreviews import classifier

    sizes = []
    real = classifier.loss_and_gradients

    def spy(model, x, y):
        sizes.append(len(x))
        return real(model, x, y)

    monkeypatch.setattr(classifier, "loss_and_gradients", spy)
    x, y = _small_problem()
    train(init_model(0), x[:10], y[:10], TrainConfig(epochs=2, batch_size=4, val_fraction=0.0))
    assert sizes == [4, 4, 2, 4, 4, 2]


def test_train_errors():
    with pytest.raises(ValueError):
        train(init_model(0), np.zeros((0, 1152)), np.zeros(0, dtype=int))
    with pytest.raises(DimensionError):
        train(init_model(0), np.zeros((4, 10)), np.zeros(4, dtype=int))
    with pytest.raises(ValueError):
        train(init_model(0), np.zeros((2, 1152)), np.array([0, 2]))


def test_save_load_round_trip(tmp_path, rng):
    x, y = _small_problem()
    model, _ = train(init_model(1), x, y)
    path = tmp_path / "m.armlp"
    save_model(model, path)
    assert path.read_bytes()[:6] == b"ARMLP1"
    back = load_model(path)
    assert back.prelu_alpha == model.prelu_alpha
    probes = rng.normal(size=(10, 1152))
    assert forward(back, probes).tobytes() == forward(model, probes).tobytes()


def test_load_wrong_magic(tmp_path):
    path = tmp_path / "m.armlp"
    path.write_bytes(b"NOTAMODEL" * 10)
    with pytest.raises(CorruptModelError, match="magic"):
        load_model(path)


def test_load_truncated(tmp_path):
    path = tmp_path / "m.armlp"
    save_model(init_model(0, SMALL_DIMS), path)
    data = path.read_bytes()
    path.write_bytes(data[:-7])
    with pytest.raises(CorruptModelError, match="checksum"):
        load_model(path)


def test_load_flipped_byte(tmp_path):
    path = tmp_path / "m.armlp"
    save_model(init_model(0, SMALL_DIMS), path)
    data = bytearray(path.read_bytes())
    data[-10] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptModelError, match="checksum"):
        load_model(path)


def test_load_version_mismatch(tmp_path):
    path = tmp_path / "m.armlp"
    save_model(init_model(0, SMALL_DIMS), path)
    data = path.read_bytes().replace(b'"format_version": 1', b'"format_version": 9')
    path.write_bytes(data)
    with pytest.raises(ModelVersionError):
        load_model(path)


def test_load_missing(tmp_path):
    with pytest.raises(FileNotFoundError, match="model not found"):
        load_model(tmp_path / "nope.armlp")
