"""Deterministic demo fixtures: a 28-step row-sequence classifier and data.

The model mirrors the classic image-rows-as-sequence setup: 28 timesteps of
28 features through two stacked LSTM layers (32 units each), then a ReLU dense
layer and a softmax head over 10 classes.  Weights come from a fixed random
seed with two deliberate touches:

* the second layer's forget and output gates get a shared input direction, so
  per-step gate means swing widely and both threshold metrics (stepwise
  hidden-state change, forget rate) have conditions that fire but do not
  saturate at their default thresholds;
* the dense biases are centered on a fixed probe set, which spreads predicted
  classes and keeps logit margins small enough for norm-ball adversarials.

Run `python -m lstmcov.fixtures OUTDIR` to write the weight file and a
synthetic dataset for CLI experiments.
"""

from __future__ import annotations

import json
import os
import sys

import numpy as np

from .model import DenseLayerWeights, LstmLayerWeights, ModelSpec, run_forward, save_model

__all__ = [
    "DEMO_TIMESTEPS",
    "DEMO_FEATURES",
    "DEMO_CLASSES",
    "DEMO_UNITS",
    "make_demo_model",
    "make_demo_dataset",
    "write_demo",
]

DEMO_TIMESTEPS = 28
DEMO_FEATURES = 28
DEMO_CLASSES = 10
DEMO_UNITS = 32

GATE_SCALE_1 = 1.2
CANDIDATE_SCALE_1 = 3.0
FORGET_BIAS_1 = 0.6
GATE_SCALE_2 = 1.0
CANDIDATE_SCALE_2 = 6.0
FORGET_BIAS_2 = 1.4
COMMON_FORGET_DRIVE_2 = 2.5
COMMON_OUTPUT_DRIVE_2 = 8.0
DENSE_SCALE = 1.6
PROBE_SEED = 1007
PROBE_COUNT = 64


def _lstm_layer(rng: np.random.Generator, units: int, input_dim: int,
                gate_scale: float, candidate_scale: float, forget_bias: float,
                common_forget: float = 0.0, common_output: float = 0.0) -> LstmLayerWeights:
    width = units + input_dim

    def mat(scale):
        return rng.standard_normal((units, width)) * (scale / np.sqrt(width))

    def with_common(W, strength):
        # Rank-1 drive on the input columns: all units feel the same signal,
        # so the per-step gate mean varies instead of averaging out.
        if not strength:
            return W
        direction = rng.standard_normal(input_dim)
        direction /= np.linalg.norm(direction)
        W = W.copy()
        W[:, units:] += strength * np.outer(np.ones(units), direction)
        return W

    return LstmLayerWeights(
        W_f=with_common(mat(gate_scale), common_forget),
        W_i=mat(gate_scale),
        W_c=mat(candidate_scale),
        W_o=with_common(mat(gate_scale), common_output),
        b_f=rng.normal(forget_bias, 0.3, size=units),
        b_i=np.zeros(units),
        b_c=np.zeros(units),
        b_o=np.zeros(units),
    )


def make_demo_model(rng_seed: int = 7) -> ModelSpec:
    """Build the 2-layer demo classifier from a fixed seed."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng_seed)))
    u = DEMO_UNITS
    lstm1 = _lstm_layer(rng, u, DEMO_FEATURES, GATE_SCALE_1, CANDIDATE_SCALE_1,
                        FORGET_BIAS_1)
    lstm2 = _lstm_layer(rng, u, u, GATE_SCALE_2, CANDIDATE_SCALE_2, FORGET_BIAS_2,
                        common_forget=COMMON_FORGET_DRIVE_2,
                        common_output=COMMON_OUTPUT_DRIVE_2)
    hidden = 48
    W1 = rng.standard_normal((hidden, u)) * (DENSE_SCALE / np.sqrt(u))
    W2 = rng.standard_normal((DEMO_CLASSES, hidden)) * (DENSE_SCALE / np.sqrt(hidden))

    draft = ModelSpec(
        layers=(lstm1, lstm2,
                DenseLayerWeights(W=W1, b=np.zeros(hidden), activation="relu"),
                DenseLayerWeights(W=W2, b=np.zeros(DEMO_CLASSES), activation="softmax")),
        input_shape=(DEMO_TIMESTEPS, DEMO_FEATURES),
        class_count=DEMO_CLASSES,
        head_input="last",
    )
    probes = make_demo_dataset(count=PROBE_COUNT, rng_seed=PROBE_SEED)
    feats = np.asarray([run_forward(draft, x).layers[-1][-1].h for x in probes])
    pre1 = feats @ W1.T
    b1 = -pre1.mean(axis=0)
    pre2 = np.maximum(pre1 + b1, 0.0) @ W2.T
    b2 = -pre2.mean(axis=0)
    return ModelSpec(
        layers=(lstm1, lstm2,
                DenseLayerWeights(W=W1, b=b1, activation="relu"),
                DenseLayerWeights(W=W2, b=b2, activation="softmax")),
        input_shape=(DEMO_TIMESTEPS, DEMO_FEATURES),
        class_count=DEMO_CLASSES,
        head_input="last",
    )


def make_demo_dataset(count: int = 200, rng_seed: int = 11) -> np.ndarray:
    """Synthetic images in [0,1]: noisy background plus a bright random patch."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng_seed)))
    n, d = DEMO_TIMESTEPS, DEMO_FEATURES
    images = np.empty((count, n, d))
    for idx in range(count):
        base = rng.normal(0.3, 0.18, size=(n, d))
        r0 = int(rng.integers(0, n - 8))
        c0 = int(rng.integers(0, d - 8))
        height = int(rng.integers(6, 14))
        width = int(rng.integers(3, 9))
        base[r0:min(r0 + height, n), c0:min(c0 + width, d)] += rng.uniform(0.5, 0.7)
        images[idx] = np.clip(base, 0.0, 1.0)
    return images


def write_demo(out_dir, model_seed: int = 7, data_seed: int = 11,
               count: int = 200) -> tuple[str, str]:
    """Write demo.model.json and demo.dataset.json into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    model_path = os.path.join(out_dir, "demo.model.json")
    data_path = os.path.join(out_dir, "demo.dataset.json")
    save_model(make_demo_model(model_seed), model_path)
    images = make_demo_dataset(count, data_seed)
    with open(data_path, "w", encoding="utf-8") as fh:
        json.dump({"inputs": images.tolist(), "labels": None}, fh)
    return model_path, data_path


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "demo"
    mp, dp = write_demo(target)
    print(f"wrote {mp}")
    print(f"wrote {dp}")
