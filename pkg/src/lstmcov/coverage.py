"""Structural coverage metrics over LSTM traces.

Three metrics are tracked for one chosen LSTM layer:

* cell coverage: a timestep t is covered once the stepwise change of the
  aggregated hidden state, delta_xi(t), exceeds alpha_h on some trace;
* gate coverage: a timestep is covered once the mean forget-gate activation
  exceeds alpha_f;
* sequence coverage: the positive and negative aggregate trajectories over a
  timestep range are discretized into symbol strings, and coverage is the
  fraction of possible strings observed.

Both threshold comparisons are strict.  The symbol partition is fitted once,
per timestep and per sign, as equal-frequency quantiles of seed-trace values,
then frozen.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import Trace

__all__ = [
    "AggregateInfo",
    "CoverageConfig",
    "CoverageState",
    "Symbolizer",
    "aggregate_info",
    "delta_aggregate",
    "forget_rate",
    "update_onestep_coverage",
    "update_sequence_coverage",
    "fit_symbolizer",
    "symbolize_trace",
    "trace_conditions",
    "coverage_rates",
    "coverage_times",
]

MAX_SYMBOLS = len(string.ascii_lowercase)


@dataclass(frozen=True)
class AggregateInfo:
    """Sums of the positive and negative components of one hidden state."""

    xi_plus: float
    xi_minus: float


@dataclass(frozen=True)
class CoverageConfig:
    """Thresholds and ranges controlling the three coverage metrics.

    seq_range is a 1-based inclusive timestep interval [lo, hi].  target_layer
    indexes the model's LSTM layers; negative values count from the end, so
    the default -1 targets the top LSTM layer.
    """

    alpha_h: float
    alpha_f: float
    symbol_count: int = 2
    seq_range: tuple[int, int] = (1, 1)
    target_layer: int = -1

    def __post_init__(self):
        if not self.alpha_h > 0:
            raise ValueError(f"alpha_h must be positive, got {self.alpha_h}")
        if not 0.0 <= self.alpha_f <= 1.0:
            raise ValueError(f"alpha_f must lie in [0, 1], got {self.alpha_f}")
        if not 2 <= self.symbol_count <= MAX_SYMBOLS:
            raise ValueError(
                f"symbol_count must be in [2, {MAX_SYMBOLS}], got {self.symbol_count}"
            )
        lo, hi = self.seq_range
        if not (1 <= lo <= hi):
            raise ValueError(f"seq_range must satisfy 1 <= lo <= hi, got {self.seq_range}")
        object.__setattr__(self, "seq_range", (int(lo), int(hi)))

    @property
    def pattern_length(self) -> int:
        lo, hi = self.seq_range
        return hi - lo + 1

    @property
    def pattern_space(self) -> int:
        return self.symbol_count ** self.pattern_length


@dataclass(frozen=True)
class Symbolizer:
    """Frozen per-timestep interval boundaries for both aggregate signs.

    boundaries_pos[t] / boundaries_neg[t] hold symbol_count - 1 ascending
    values for 1-based timestep t.  A value lands in the lowest interval whose
    upper boundary is >= the value, so boundary values map to the lower
    interval.
    """

    symbol_count: int
    boundaries_pos: dict[int, np.ndarray]
    boundaries_neg: dict[int, np.ndarray]

    def symbol(self, t: int, sign: str, value: float) -> str:
        table = self.boundaries_pos if sign == "+" else self.boundaries_neg
        if t not in table:
            raise KeyError(f"symbolizer has no boundaries for timestep {t}")
        idx = int(np.searchsorted(table[t], value, side="left"))
        return string.ascii_lowercase[idx]


@dataclass
class CoverageState:
    """Mutable registries for all three metrics on an n-timestep model."""

    timesteps: int
    cell_hits: np.ndarray = field(init=False)
    gate_hits: np.ndarray = field(init=False)
    seq_patterns_pos: dict[str, int] = field(default_factory=dict)
    seq_patterns_neg: dict[str, int] = field(default_factory=dict)
    symbolizer: Optional[Symbolizer] = None

    def __post_init__(self):
        if self.timesteps < 1:
            raise ValueError(f"timesteps must be positive, got {self.timesteps}")
        self.cell_hits = np.zeros(self.timesteps, dtype=np.int64)
        self.gate_hits = np.zeros(self.timesteps, dtype=np.int64)


def aggregate_info(h: Sequence) -> AggregateInfo:
    """Split a hidden-state vector into its positive and negative mass.

    xi_plus sums the strictly positive components, xi_minus the strictly
    negative ones; zeros contribute to neither.
    """
    h = np.asarray(h, dtype=np.float64)
    return AggregateInfo(
        xi_plus=float(h[h > 0].sum()),
        xi_minus=float(h[h < 0].sum()),
    )


def delta_aggregate(cur: AggregateInfo, prev: AggregateInfo) -> float:
    """Stepwise information change: |xi+ - prev xi+| + |xi- - prev xi-|."""
    return abs(cur.xi_plus - prev.xi_plus) + abs(cur.xi_minus - prev.xi_minus)


def forget_rate(f: Sequence) -> float:
    """Mean forget-gate activation; measures how much cell state survives."""
    f = np.asarray(f, dtype=np.float64)
    if f.size == 0:
        raise ValueError("forget_rate of an empty gate vector")
    return float(f.mean())


_ZERO = AggregateInfo(0.0, 0.0)


def _layer_steps(trace: Trace, cfg: CoverageConfig):
    try:
        return trace.layers[cfg.target_layer]
    except IndexError:
        raise IndexError(
            f"target_layer {cfg.target_layer} out of range for a trace with "
            f"{len(trace.layers)} LSTM layers"
        ) from None


def _check_range(cfg: CoverageConfig, n: int) -> None:
    lo, hi = cfg.seq_range
    if hi > n:
        raise ValueError(f"seq_range {cfg.seq_range} exceeds trace length {n}")


def trace_aggregates(trace: Trace, cfg: CoverageConfig) -> list[AggregateInfo]:
    """Aggregate info of the target layer's hidden state at each timestep."""
    return [aggregate_info(step.h) for step in _layer_steps(trace, cfg)]


def update_onestep_coverage(
    state: CoverageState, trace: Trace, cfg: CoverageConfig
) -> set[str]:
    """Record cell and gate condition hits from one trace.

    Returns the ids of conditions newly satisfied by this trace (hit count
    went 0 to 1).  Ids are "cell:t" and "gate:t" with t 1-based.
    """
    steps = _layer_steps(trace, cfg)
    if len(steps) != state.timesteps:
        raise ValueError(
            f"trace has {len(steps)} timesteps, state expects {state.timesteps}"
        )
    new: set[str] = set()
    prev = _ZERO
    for idx, step in enumerate(steps):
        cur = aggregate_info(step.h)
        if delta_aggregate(cur, prev) > cfg.alpha_h:
            if state.cell_hits[idx] == 0:
                new.add(f"cell:{idx + 1}")
            state.cell_hits[idx] += 1
        if forget_rate(step.f) > cfg.alpha_f:
            if state.gate_hits[idx] == 0:
                new.add(f"gate:{idx + 1}")
            state.gate_hits[idx] += 1
        prev = cur
    return new


def fit_symbolizer(traces: Iterable[Trace], cfg: CoverageConfig) -> Symbolizer:
    """Fit equal-frequency quantile boundaries from a collection of traces.

    For every timestep in cfg.seq_range and each aggregate sign, the
    symbol_count - 1 boundaries are the k/symbol_count quantiles (linear
    interpolation) of the values observed across the traces.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("cannot fit a symbolizer on an empty trace collection")
    lo, hi = cfg.seq_range
    per_t_pos: dict[int, list[float]] = {t: [] for t in range(lo, hi + 1)}
    per_t_neg: dict[int, list[float]] = {t: [] for t in range(lo, hi + 1)}
    for trace in traces:
        aggs = trace_aggregates(trace, cfg)
        _check_range(cfg, len(aggs))
        for t in range(lo, hi + 1):
            per_t_pos[t].append(aggs[t - 1].xi_plus)
            per_t_neg[t].append(aggs[t - 1].xi_minus)
    qs = [k / cfg.symbol_count for k in range(1, cfg.symbol_count)]
    bounds_pos = {}
    bounds_neg = {}
    for t in range(lo, hi + 1):
        bounds_pos[t] = np.quantile(np.asarray(per_t_pos[t]), qs)
        bounds_neg[t] = np.quantile(np.asarray(per_t_neg[t]), qs)
    return Symbolizer(
        symbol_count=cfg.symbol_count,
        boundaries_pos=bounds_pos,
        boundaries_neg=bounds_neg,
    )


def symbolize_trace(
    trace: Trace, state: CoverageState, cfg: CoverageConfig
) -> tuple[str, str]:
    """Map a trace's aggregate trajectories over seq_range to symbol strings.

    Requires state.symbolizer to be fitted.  Returns (positive pattern,
    negative pattern), each of length hi - lo + 1.
    """
    if state.symbolizer is None:
        raise RuntimeError("symbolizer not fitted; call fit_symbolizer first")
    sym = state.symbolizer
    aggs = trace_aggregates(trace, cfg)
    _check_range(cfg, len(aggs))
    lo, hi = cfg.seq_range
    pos = "".join(sym.symbol(t, "+", aggs[t - 1].xi_plus) for t in range(lo, hi + 1))
    neg = "".join(sym.symbol(t, "-", aggs[t - 1].xi_minus) for t in range(lo, hi + 1))
    return pos, neg


def update_sequence_coverage(
    state: CoverageState, trace: Trace, cfg: CoverageConfig
) -> set[str]:
    """Record the trace's symbol patterns; returns newly observed pattern ids.

    Ids are "seq+:PATTERN" and "seq-:PATTERN".
    """
    pos, neg = symbolize_trace(trace, state, cfg)
    new: set[str] = set()
    if pos not in state.seq_patterns_pos:
        state.seq_patterns_pos[pos] = 0
        new.add(f"seq+:{pos}")
    state.seq_patterns_pos[pos] += 1
    if neg not in state.seq_patterns_neg:
        state.seq_patterns_neg[neg] = 0
        new.add(f"seq-:{neg}")
    state.seq_patterns_neg[neg] += 1
    return new


def trace_conditions(
    trace: Trace, state: CoverageState, cfg: CoverageConfig
) -> set[str]:
    """All condition ids one trace satisfies, independent of registry state.

    Cell and gate conditions are threshold events per timestep; the two
    sequence conditions are the trace's own symbol patterns.  Requires a
    fitted symbolizer when seq patterns are wanted.
    """
    steps = _layer_steps(trace, cfg)
    out: set[str] = set()
    prev = _ZERO
    for idx, step in enumerate(steps):
        cur = aggregate_info(step.h)
        if delta_aggregate(cur, prev) > cfg.alpha_h:
            out.add(f"cell:{idx + 1}")
        if forget_rate(step.f) > cfg.alpha_f:
            out.add(f"gate:{idx + 1}")
        prev = cur
    if state.symbolizer is not None:
        pos, neg = symbolize_trace(trace, state, cfg)
        out.add(f"seq+:{pos}")
        out.add(f"seq-:{neg}")
    return out


def coverage_rates(
    state: CoverageState, cfg: CoverageConfig
) -> tuple[float, float, float, float]:
    """Current (cell, gate, seq_pos, seq_neg) coverage rates, each in [0, 1]."""
    n = state.timesteps
    cell = float(np.count_nonzero(state.cell_hits)) / n
    gate = float(np.count_nonzero(state.gate_hits)) / n
    space = cfg.pattern_space
    seq_pos = len(state.seq_patterns_pos) / space
    seq_neg = len(state.seq_patterns_neg) / space
    return cell, gate, seq_pos, seq_neg


def coverage_times(state: CoverageState) -> dict[str, dict[str, int]]:
    """Hit counts for every condition, keyed by metric.

    Cell and gate tables list every timestep condition (including zero
    counts); sequence tables list the patterns observed so far.
    """
    return {
        "cell": {f"cell:{t + 1}": int(c) for t, c in enumerate(state.cell_hits)},
        "gate": {f"gate:{t + 1}": int(c) for t, c in enumerate(state.gate_hits)},
        "seq_pos": dict(state.seq_patterns_pos),
        "seq_neg": dict(state.seq_patterns_neg),
    }
