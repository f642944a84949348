import numpy as np
import pytest

from redactcert_bridge.config import BridgeConfig, BridgeError
from redactcert_bridge.models import evaluate_flat, load_model


def test_toy_model_deterministic_across_loads(toy_config):
    a = load_model(toy_config)
    b = load_model(toy_config)
    x = np.linspace(0, 1, a.n, dtype=np.float32)
    pa = evaluate_flat(a, x)
    pb = evaluate_flat(b, x)
    assert np.array_equal(pa, pb)


def test_toy_model_repeatable(toy_model):
    x = np.linspace(0, 1, toy_model.n, dtype=np.float32)
    assert np.array_equal(evaluate_flat(toy_model, x), evaluate_flat(toy_model, x))


def test_toy_model_softmax_valid(toy_model):
    probs = evaluate_flat(toy_model, np.zeros(toy_model.n, dtype=np.float32))
    assert probs.shape == (toy_model.m,)
    assert abs(probs.sum() - 1.0) < 1e-9
    assert np.all(probs >= 0)


def test_different_seed_changes_weights():
    a = load_model(BridgeConfig(model="toy-cnn", seed=0))
    b = load_model(BridgeConfig(model="toy-cnn", seed=1))
    x = np.linspace(0, 1, a.n, dtype=np.float32)
    assert not np.allclose(evaluate_flat(a, x), evaluate_flat(b, x))


def test_wrong_length_rejected(toy_model):
    with pytest.raises(BridgeError):
        evaluate_flat(toy_model, np.zeros(toy_model.n - 1, dtype=np.float32))


def test_unknown_model_name_rejected():
    with pytest.raises(BridgeError):
        BridgeConfig(model="mystery-net")
