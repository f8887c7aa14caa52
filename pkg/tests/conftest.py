import json
from pathlib import Path

import numpy as np
import pytest

from lstmcov import (
    DenseLayerWeights,
    LstmLayerWeights,
    ModelSpec,
    load_model,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def tiny2_path() -> Path:
    return FIXTURES / "tiny2.model.json"


@pytest.fixture(scope="session")
def tiny2(tiny2_path):
    return load_model(tiny2_path)


@pytest.fixture(scope="session")
def tiny2_doc(tiny2_path):
    with open(tiny2_path) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def golden():
    with open(FIXTURES / "tiny2.golden.json") as fh:
        return json.load(fh)


def make_zero_model(n=4, d=3, units=2, classes=2, head="last") -> ModelSpec:
    """All-zero weights: h is always 0 and the prediction is constant."""
    z = np.zeros
    lstm = LstmLayerWeights(
        W_f=z((units, units + d)), W_i=z((units, units + d)),
        W_c=z((units, units + d)), W_o=z((units, units + d)),
        b_f=z(units), b_i=z(units), b_c=z(units), b_o=z(units),
    )
    head_in = units if head == "last" else units * n
    dense = DenseLayerWeights(W=z((classes, head_in)), b=z(classes), activation="softmax")
    return ModelSpec(layers=(lstm, dense), input_shape=(n, d),
                     class_count=classes, head_input=head)


def make_random_model(rng: np.random.Generator, n: int, d: int, units: int,
                      classes: int, head: str = "last", lstm_layers: int = 1,
                      scale: float = 1.0) -> ModelSpec:
    """Small random model for property and gradient tests."""
    def lstm(in_dim):
        w = lambda: rng.standard_normal((units, units + in_dim)) * scale
        b = lambda: rng.standard_normal(units) * scale
        return LstmLayerWeights(W_f=w(), W_i=w(), W_c=w(), W_o=w(),
                                b_f=b(), b_i=b(), b_c=b(), b_o=b())
    layers = [lstm(d)]
    for _ in range(lstm_layers - 1):
        layers.append(lstm(units))
    head_in = units if head == "last" else units * n
    hidden = max(2, classes)
    layers.append(DenseLayerWeights(
        W=rng.standard_normal((hidden, head_in)) * scale,
        b=rng.standard_normal(hidden) * scale, activation="relu"))
    layers.append(DenseLayerWeights(
        W=rng.standard_normal((classes, hidden)) * scale,
        b=rng.standard_normal(classes) * scale, activation="softmax"))
    return ModelSpec(layers=tuple(layers), input_shape=(n, d),
                     class_count=classes, head_input=head)


@pytest.fixture
def zero_model():
    return make_zero_model()


@pytest.fixture(scope="session")
def small_model():
    """A fixed 2-layer model big enough for campaign tests, small enough to be fast."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(123)))
    return make_random_model(rng, n=6, d=5, units=8, classes=3,
                             lstm_layers=2, scale=0.7)


@pytest.fixture(scope="session")
def small_dataset():
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(321)))
    return rng.uniform(0.0, 1.0, size=(40, 6, 5))
