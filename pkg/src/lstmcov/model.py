"""LSTM classifier model: weight-file loading, traced forward pass, input gradients.

The model under test is a stack of LSTM layers followed by one or more dense
layers.  Every forward pass records the full internal state of each LSTM layer
(gate vectors f/i/o, cell state c, hidden state h at every timestep) so that
coverage metrics can be computed from the trace.  Gradients of the
classification loss with respect to the input are computed by backpropagation
through time and feed the gradient-ascent mutation engine.

All arithmetic is 64-bit floating point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "ModelError",
    "ModelParseError",
    "ModelShapeError",
    "LstmLayerWeights",
    "DenseLayerWeights",
    "ModelSpec",
    "StepTrace",
    "Trace",
    "load_model",
    "save_model",
    "lstm_step",
    "run_forward",
    "input_gradient",
    "class_probabilities",
    "prediction_loss",
]

DENSE_ACTIVATIONS = ("relu", "softmax", "identity")


class ModelError(Exception):
    """Base class for weight-file and model-shape problems."""


class ModelParseError(ModelError):
    """The weight file is not valid JSON or is missing/abusing fields."""


class ModelShapeError(ModelError):
    """Layer dimensions are inconsistent."""


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _require_finite(a: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ModelParseError(f"{where}: contains non-finite entries")


@dataclass(frozen=True)
class LstmLayerWeights:
    """Weights of one LSTM layer.

    Each W matrix has shape (units, units + input_dim); columns are laid out
    as [h_{t-1} | x_t].  Bias vectors have length units.
    """

    W_f: np.ndarray
    W_i: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray
    # Row-stacked kernel [W_f; W_i; W_c; W_o] and bias, built once for speed.
    _kernel: np.ndarray = field(init=False, repr=False, compare=False)
    _bias: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mats = {"W_f": self.W_f, "W_i": self.W_i, "W_c": self.W_c, "W_o": self.W_o}
        vecs = {"b_f": self.b_f, "b_i": self.b_i, "b_c": self.b_c, "b_o": self.b_o}
        for name, a in {**mats, **vecs}.items():
            object.__setattr__(self, name, _freeze(a))
            _require_finite(getattr(self, name), name)
        shape = self.W_f.shape
        if len(shape) != 2:
            raise ModelShapeError(f"W_f must be a matrix, got shape {shape}")
        for name in ("W_i", "W_c", "W_o"):
            if getattr(self, name).shape != shape:
                raise ModelShapeError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape} (same as W_f)"
                )
        units = shape[0]
        if shape[1] <= units:
            raise ModelShapeError(
                f"W matrices have shape {shape}; need more columns than rows "
                f"(columns = units + input_dim)"
            )
        for name in ("b_f", "b_i", "b_c", "b_o"):
            if getattr(self, name).shape != (units,):
                raise ModelShapeError(
                    f"{name} has shape {getattr(self, name).shape}, expected ({units},)"
                )
        object.__setattr__(
            self, "_kernel", _freeze(np.vstack([self.W_f, self.W_i, self.W_c, self.W_o]))
        )
        object.__setattr__(
            self, "_bias", _freeze(np.concatenate([self.b_f, self.b_i, self.b_c, self.b_o]))
        )

    @property
    def units(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_f.shape[1] - self.units


@dataclass(frozen=True)
class DenseLayerWeights:
    """A fully-connected layer: y = activation(W @ x + b), W of shape (out, in)."""

    W: np.ndarray
    b: np.ndarray
    activation: str

    def __post_init__(self):
        object.__setattr__(self, "W", _freeze(self.W))
        object.__setattr__(self, "b", _freeze(self.b))
        _require_finite(self.W, "W")
        _require_finite(self.b, "b")
        if self.W.ndim != 2:
            raise ModelShapeError(f"dense W must be a matrix, got shape {self.W.shape}")
        if self.b.shape != (self.W.shape[0],):
            raise ModelShapeError(
                f"dense b has shape {self.b.shape}, expected ({self.W.shape[0]},)"
            )
        if self.activation not in DENSE_ACTIVATIONS:
            raise ModelParseError(
                f"unknown dense activation {self.activation!r}; expected one of {DENSE_ACTIVATIONS}"
            )

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]


Layer = Union[LstmLayerWeights, DenseLayerWeights]


@dataclass(frozen=True)
class ModelSpec:
    """A validated, immutable LSTM classifier.

    Layers must be one or more LSTM layers followed by one or more dense
    layers.  ``head_input`` declares whether the dense head consumes the last
    hidden state ("last") or the concatenation of all timesteps ("flatten").
    Instances are safe to share across threads.
    """

    layers: tuple[Layer, ...]
    input_shape: tuple[int, int]  # (timesteps n, features per step)
    class_count: int
    head_input: str = "last"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        n, d = self.input_shape
        if n < 1 or d < 1:
            raise ModelShapeError(f"input_shape must be positive, got {self.input_shape}")
        if self.class_count < 1:
            raise ModelShapeError(f"class_count must be positive, got {self.class_count}")
        if self.head_input not in ("last", "flatten"):
            raise ModelParseError(f"head_input must be 'last' or 'flatten', got {self.head_input!r}")

        lstm = [l for l in self.layers if isinstance(l, LstmLayerWeights)]
        dense = [l for l in self.layers if isinstance(l, DenseLayerWeights)]
        if not lstm or not dense:
            raise ModelShapeError("model needs at least one LSTM layer and one dense layer")
        if self.layers[: len(lstm)] != tuple(lstm):
            raise ModelShapeError("LSTM layers must all precede the dense head")

        width = d
        for idx, layer in enumerate(lstm):
            if layer.input_dim != width:
                raise ModelShapeError(
                    f"layers[{idx}] (lstm) expects input width {layer.input_dim} "
                    f"but the previous layer outputs {width}"
                )
            width = layer.units
        head_width = width if self.head_input == "last" else width * n
        for j, layer in enumerate(dense):
            idx = len(lstm) + j
            expected = head_width if j == 0 else dense[j - 1].out_dim
            if layer.in_dim != expected:
                raise ModelShapeError(
                    f"layers[{idx}] (dense) expects input width {layer.in_dim} "
                    f"but layers[{idx - 1}] outputs {expected}"
                )
        if dense[-1].out_dim != self.class_count:
            raise ModelShapeError(
                f"final dense layer outputs {dense[-1].out_dim} values "
                f"but class_count is {self.class_count}"
            )

    @property
    def lstm_layers(self) -> tuple[LstmLayerWeights, ...]:
        return tuple(l for l in self.layers if isinstance(l, LstmLayerWeights))

    @property
    def dense_layers(self) -> tuple[DenseLayerWeights, ...]:
        return tuple(l for l in self.layers if isinstance(l, DenseLayerWeights))

    @property
    def timesteps(self) -> int:
        return self.input_shape[0]

    def check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.input_shape:
            raise ValueError(f"input has shape {x.shape}, model expects {self.input_shape}")
        return x


@dataclass(frozen=True)
class StepTrace:
    """Internal state of one LSTM cell at one timestep."""

    f: np.ndarray
    i: np.ndarray
    o: np.ndarray
    c: np.ndarray
    h: np.ndarray


@dataclass(frozen=True)
class Trace:
    """Per-layer, per-timestep internal states plus the final classification."""

    layers: tuple[tuple[StepTrace, ...], ...]
    logits: np.ndarray
    predicted_class: int


# ---------------------------------------------------------------------------
# Weight-file IO
# ---------------------------------------------------------------------------

def _get(obj: dict, key: str, where: str):
    if key not in obj:
        raise ModelParseError(f"{where}: missing required field {key!r}")
    return obj[key]


def _as_matrix(value, where: str) -> np.ndarray:
    try:
        a = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ModelParseError(f"{where}: not a numeric matrix ({e})") from None
    if a.ndim != 2:
        raise ModelParseError(f"{where}: expected a matrix, got shape {a.shape}")
    return a


def _as_vector(value, where: str) -> np.ndarray:
    try:
        a = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ModelParseError(f"{where}: not a numeric vector ({e})") from None
    if a.ndim != 1:
        raise ModelParseError(f"{where}: expected a vector, got shape {a.shape}")
    return a


def load_model(path) -> ModelSpec:
    """Parse and validate a weight file (UTF-8 JSON), returning a ModelSpec.

    Raises ModelParseError for malformed files (with the byte or field
    location) and ModelShapeError when layer dimensions do not chain.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelParseError(
            f"{path}: invalid JSON at line {e.lineno} column {e.colno} (byte {e.pos}): {e.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ModelParseError(f"{path}: top level must be a JSON object")

    shape = _get(doc, "input_shape", "top level")
    if not (isinstance(shape, (list, tuple)) and len(shape) == 2):
        raise ModelParseError("input_shape: expected [timesteps, features]")
    class_count = _get(doc, "class_count", "top level")
    head_input = doc.get("head_input", "last")
    raw_layers = _get(doc, "layers", "top level")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ModelParseError("layers: expected a non-empty list")

    layers: list[Layer] = []
    for idx, spec in enumerate(raw_layers):
        where = f"layers[{idx}]"
        if not isinstance(spec, dict):
            raise ModelParseError(f"{where}: expected an object")
        kind = _get(spec, "type", where)
        if kind == "lstm":
            units = int(_get(spec, "units", where))
            mats = {k: _as_matrix(_get(spec, k, where), f"{where}.{k}")
                    for k in ("W_f", "W_i", "W_c", "W_o")}
            vecs = {k: _as_vector(_get(spec, k, where), f"{where}.{k}")
                    for k in ("b_f", "b_i", "b_c", "b_o")}
            for k, m in mats.items():
                if m.shape[0] != units:
                    raise ModelShapeError(
                        f"{where}.{k} has {m.shape[0]} rows but units is {units}"
                    )
            try:
                layers.append(LstmLayerWeights(**mats, **vecs))
            except ModelError as e:
                raise type(e)(f"{where}: {e}") from None
        elif kind == "dense":
            try:
                layers.append(
                    DenseLayerWeights(
                        W=_as_matrix(_get(spec, "W", where), f"{where}.W"),
                        b=_as_vector(_get(spec, "b", where), f"{where}.b"),
                        activation=_get(spec, "activation", where),
                    )
                )
            except ModelError as e:
                raise type(e)(f"{where}: {e}") from None
        else:
            raise ModelParseError(f"{where}: unknown layer type {kind!r}")

    return ModelSpec(
        layers=tuple(layers),
        input_shape=(int(shape[0]), int(shape[1])),
        class_count=int(class_count),
        head_input=head_input,
    )


def save_model(model: ModelSpec, path) -> None:
    """Write a ModelSpec back to the weight-file format (full double precision)."""
    layers = []
    for layer in model.layers:
        if isinstance(layer, LstmLayerWeights):
            layers.append({
                "type": "lstm",
                "units": layer.units,
                "W_f": layer.W_f.tolist(), "W_i": layer.W_i.tolist(),
                "W_c": layer.W_c.tolist(), "W_o": layer.W_o.tolist(),
                "b_f": layer.b_f.tolist(), "b_i": layer.b_i.tolist(),
                "b_c": layer.b_c.tolist(), "b_o": layer.b_o.tolist(),
            })
        else:
            layers.append({
                "type": "dense",
                "activation": layer.activation,
                "W": layer.W.tolist(),
                "b": layer.b.tolist(),
            })
    doc = {
        "input_shape": list(model.input_shape),
        "class_count": model.class_count,
        "head_input": model.head_input,
        "layers": layers,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

def lstm_step(
    weights: LstmLayerWeights,
    x_t: np.ndarray,
    c_prev: np.ndarray,
    h_prev: np.ndarray,
) -> StepTrace:
    """One LSTM cell update.

    f = sigmoid(W_f [h, x] + b_f), i likewise, c = f*c_prev + i*tanh(W_c [h, x] + b_c),
    o = sigmoid(W_o [h, x] + b_o), h = o * tanh(c).  Inputs are not modified.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    u = weights.units
    if x_t.shape != (weights.input_dim,):
        raise ValueError(f"x_t has shape {x_t.shape}, expected ({weights.input_dim},)")
    if c_prev.shape != (u,) or h_prev.shape != (u,):
        raise ValueError(f"c_prev/h_prev must have shape ({u},)")
    z = np.concatenate([h_prev, x_t])
    acts = weights._kernel @ z + weights._bias
    f = _sigmoid(acts[:u])
    i = _sigmoid(acts[u:2 * u])
    g = np.tanh(acts[2 * u:3 * u])
    o = _sigmoid(acts[3 * u:])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return StepTrace(f=f, i=i, o=o, c=c, h=h)


def _run_lstm_layer(weights: LstmLayerWeights, seq: np.ndarray, want_cache: bool):
    """Run one LSTM layer over a (n, input_dim) sequence with h_0 = c_0 = 0.

    Returns (H, steps, cache).  H is the (n, units) hidden sequence; cache
    holds the intermediates the backward pass needs.
    """
    n = seq.shape[0]
    u = weights.units
    c = np.zeros(u)
    h = np.zeros(u)
    H = np.empty((n, u))
    steps = []
    cache = {"f": [], "i": [], "g": [], "o": [], "c": [], "tc": []} if want_cache else None
    for t in range(n):
        z = np.concatenate([h, seq[t]])
        acts = weights._kernel @ z + weights._bias
        f = _sigmoid(acts[:u])
        i = _sigmoid(acts[u:2 * u])
        g = np.tanh(acts[2 * u:3 * u])
        o = _sigmoid(acts[3 * u:])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        H[t] = h
        steps.append(StepTrace(f=f, i=i, o=o, c=c, h=h))
        if want_cache:
            cache["f"].append(f)
            cache["i"].append(i)
            cache["g"].append(g)
            cache["o"].append(o)
            cache["c"].append(c)
            cache["tc"].append(tc)
    return H, steps, cache


def _stable_softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / e.sum()


def _run_dense_head(model: ModelSpec, H: np.ndarray, want_cache: bool):
    """Apply the dense head to the top LSTM layer's hidden sequence H (n, units)."""
    v = H[-1].copy() if model.head_input == "last" else H.ravel()
    cache = {"pre": [], "out": []} if want_cache else None
    for layer in model.dense_layers:
        z = layer.W @ v + layer.b
        if layer.activation == "relu":
            v = np.maximum(z, 0.0)
        elif layer.activation == "softmax":
            v = _stable_softmax(z)
        else:
            v = z
        if want_cache:
            cache["pre"].append(z)
            cache["out"].append(v)
    return v, cache


def _forward(model: ModelSpec, x: np.ndarray, want_cache: bool):
    x = model.check_input(x)
    seq = x
    layer_steps = []
    lstm_caches = []
    Hs = []
    for weights in model.lstm_layers:
        H, steps, cache = _run_lstm_layer(weights, seq, want_cache)
        layer_steps.append(tuple(steps))
        lstm_caches.append(cache)
        Hs.append(H)
        seq = H
    out, dense_cache = _run_dense_head(model, Hs[-1], want_cache)
    return layer_steps, Hs, out, lstm_caches, dense_cache


def run_forward(model: ModelSpec, x: Sequence) -> Trace:
    """Run the full network on one input, recording every internal state.

    Pure function of (model, x): identical inputs give identical traces.
    """
    layer_steps, _, out, _, _ = _forward(model, np.asarray(x), want_cache=False)
    predicted = int(np.argmax(out))  # ties break toward the lowest index
    return Trace(layers=tuple(layer_steps), logits=out, predicted_class=predicted)


def _class_log_probs(model: ModelSpec, out: np.ndarray, dense_cache) -> np.ndarray:
    """Log class probabilities for the network output.

    A softmax final layer is the classification head itself; otherwise a
    softmax is applied on top of the raw output.
    """
    if model.dense_layers[-1].activation == "softmax":
        z = dense_cache["pre"][-1] if dense_cache is not None else None
        if z is None:
            # Reconstruct from probabilities is lossy; callers with no cache
            # only need probabilities, handled in class_probabilities.
            raise RuntimeError("log-probs need the dense cache")
        return z - _logsumexp(z)
    return out - _logsumexp(out)


def _logsumexp(z: np.ndarray) -> float:
    m = np.max(z)
    return m + np.log(np.sum(np.exp(z - m)))


def class_probabilities(model: ModelSpec, x: Sequence) -> np.ndarray:
    """Class probability vector for one input (softmax of the head output)."""
    _, _, out, _, dense_cache = _forward(model, np.asarray(x), want_cache=True)
    return np.exp(_class_log_probs(model, out, dense_cache))


def prediction_loss(model: ModelSpec, x: Sequence, target_class: int) -> float:
    """Cross-entropy loss: negative log of the softmax probability of target_class."""
    if not 0 <= target_class < model.class_count:
        raise ValueError(f"target_class {target_class} outside [0, {model.class_count})")
    _, _, out, _, dense_cache = _forward(model, np.asarray(x), want_cache=True)
    return float(-_class_log_probs(model, out, dense_cache)[target_class])


# ---------------------------------------------------------------------------
# Backpropagation through time
# ---------------------------------------------------------------------------

def _bptt_layer(weights: LstmLayerWeights, cache: dict, dH: np.ndarray) -> np.ndarray:
    """Backprop one LSTM layer given per-timestep gradients on its hidden outputs."""
    n = dH.shape[0]
    u = weights.units
    kernel_T = weights._kernel.T  # (u + input_dim, 4u)
    dX = np.empty((n, weights.input_dim))
    dh_carry = np.zeros(u)
    dc_carry = np.zeros(u)
    for t in range(n - 1, -1, -1):
        f = cache["f"][t]
        i = cache["i"][t]
        g = cache["g"][t]
        o = cache["o"][t]
        tc = cache["tc"][t]
        c_prev = cache["c"][t - 1] if t > 0 else np.zeros(u)
        dh = dH[t] + dh_carry
        dc = dc_carry + dh * o * (1.0 - tc * tc)
        da = np.concatenate([
            dc * c_prev * f * (1.0 - f),        # forget gate pre-activation
            dc * g * i * (1.0 - i),             # input gate
            dc * i * (1.0 - g * g),             # candidate
            dh * tc * o * (1.0 - o),            # output gate
        ])
        dz = kernel_T @ da
        dh_carry = dz[:u]
        dX[t] = dz[u:]
        dc_carry = dc * f
    return dX


def input_gradient(model: ModelSpec, x: Sequence, target_class: int) -> np.ndarray:
    """Gradient of the classification loss w.r.t. the input, via BPTT.

    The loss is the negative log softmax probability of ``target_class`` (see
    prediction_loss).  The result has the same shape as the input.
    """
    if not 0 <= target_class < model.class_count:
        raise ValueError(f"target_class {target_class} outside [0, {model.class_count})")
    x = np.asarray(x, dtype=np.float64)
    _, Hs, out, lstm_caches, dense_cache = _forward(model, x, want_cache=True)

    dense = model.dense_layers
    probs = np.exp(_class_log_probs(model, out, dense_cache))
    grad_ce = probs.copy()
    grad_ce[target_class] -= 1.0

    # Walk the dense chain backwards.  With a softmax final layer, grad_ce is
    # already the gradient at that layer's pre-activation (softmax fused with
    # the log loss); otherwise it is the gradient at the network output.
    if dense[-1].activation == "softmax":
        dz = grad_ce
        start = len(dense) - 1
    else:
        dv = grad_ce
        dz = _through_activation(dense[-1], dense_cache, len(dense) - 1, dv)
        start = len(dense) - 1
    for j in range(start, -1, -1):
        layer = dense[j]
        if j < start:
            dz = _through_activation(layer, dense_cache, j, dv)
        dv = layer.W.T @ dz

    n, _ = model.input_shape
    top_units = model.lstm_layers[-1].units
    if model.head_input == "last":
        dH = np.zeros((n, top_units))
        dH[-1] = dv
    else:
        dH = dv.reshape(n, top_units)

    for weights, cache in zip(reversed(model.lstm_layers), reversed(lstm_caches)):
        dH = _bptt_layer(weights, cache, dH)
    return dH


def _through_activation(layer: DenseLayerWeights, cache: dict, j: int, dv: np.ndarray) -> np.ndarray:
    if layer.activation == "relu":
        return dv * (cache["pre"][j] > 0)
    if layer.activation == "softmax":
        p = cache["out"][j]
        return p * (dv - float(dv @ p))
    return dv
