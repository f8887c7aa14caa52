"""Test-case mutation: gradient ascent for continuous inputs, token edits for text.

Continuous inputs are mutated by stochastic gradient ascent (SGA): tau steps
of x <- clamp(x + epsilon * grad), where grad is the raw input gradient of the
classification loss at the seed's original predicted label.  epsilon and tau
are drawn uniformly from configured ranges.

Token sequences are mutated by one of four operators: synonym replacement,
random insertion, random swap, random deletion.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .model import ModelSpec, input_gradient, run_forward

__all__ = [
    "MutationConfig",
    "DiscreteInput",
    "DISCRETE_OPS",
    "sample_params",
    "sga_mutate",
    "mutate_discrete",
]

DISCRETE_OPS = ("synonym_replace", "random_insert", "random_swap", "random_delete")


@dataclass(frozen=True)
class MutationConfig:
    """Parameter ranges for gradient-ascent mutation.

    epsilon_range and tau_range are inclusive [lo, hi] intervals; clamp is the
    per-feature valid interval (e.g. (0, 1) for pixel data).  rng_seed seeds
    the mutation random streams.
    """

    epsilon_range: tuple[float, float] = (0.01, 0.1)
    tau_range: tuple[int, int] = (1, 5)
    clamp: tuple[float, float] = (0.0, 1.0)
    rng_seed: int = 0

    def __post_init__(self):
        e_lo, e_hi = self.epsilon_range
        if not (0 < e_lo <= e_hi):
            raise ValueError(f"epsilon_range must satisfy 0 < lo <= hi, got {self.epsilon_range}")
        t_lo, t_hi = self.tau_range
        if not (1 <= t_lo <= t_hi):
            raise ValueError(f"tau_range must satisfy 1 <= lo <= hi, got {self.tau_range}")
        if not self.clamp[0] < self.clamp[1]:
            raise ValueError(f"clamp interval must satisfy lo < hi, got {self.clamp}")
        object.__setattr__(self, "epsilon_range", (float(e_lo), float(e_hi)))
        object.__setattr__(self, "tau_range", (int(t_lo), int(t_hi)))
        object.__setattr__(self, "clamp", (float(self.clamp[0]), float(self.clamp[1])))


@dataclass(frozen=True)
class DiscreteInput:
    """A token-sequence input with the tables its mutation operators need.

    vocabulary maps token id to surface form; synonyms maps token id to the
    ids that may replace it (never including the key itself).  The unchanged
    flag marks mutation results that could not alter the input.
    """

    tokens: tuple[int, ...]
    vocabulary: dict[int, str]
    synonyms: dict[int, tuple[int, ...]] = field(default_factory=dict)
    unchanged: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        for tok in self.tokens:
            if tok not in self.vocabulary:
                raise ValueError(f"token id {tok} not in vocabulary")
        for key, syns in self.synonyms.items():
            if key in syns:
                raise ValueError(f"synonym list for token {key} includes the token itself")
            for s in syns:
                if s not in self.vocabulary:
                    raise ValueError(f"synonym id {s} (for token {key}) not in vocabulary")

    def words(self) -> list[str]:
        return [self.vocabulary[t] for t in self.tokens]


def sample_params(cfg: MutationConfig, rng: np.random.Generator) -> tuple[float, int]:
    """Draw (epsilon, tau): epsilon uniform real, tau uniform integer, both inclusive."""
    e_lo, e_hi = cfg.epsilon_range
    t_lo, t_hi = cfg.tau_range
    epsilon = float(rng.uniform(e_lo, e_hi))
    tau = int(rng.integers(t_lo, t_hi + 1))
    return epsilon, tau


def sga_mutate(
    model: ModelSpec,
    seed_input: Sequence,
    epsilon: float,
    tau: int,
    cfg: MutationConfig,
) -> np.ndarray:
    """Run tau gradient-ascent steps from seed_input.

    Each step adds epsilon times the raw input gradient of the loss at the
    seed's original predicted label, then clamps every feature to cfg.clamp.
    The gradient is recomputed at the current point each step.
    """
    x = model.check_input(np.array(seed_input, dtype=np.float64))
    label = run_forward(model, x).predicted_class
    lo, hi = cfg.clamp
    for _ in range(tau):
        grad = input_gradient(model, x, label)
        x = np.clip(x + epsilon * grad, lo, hi)
    return x


def mutate_discrete(
    inp: DiscreteInput, op: str, rng: np.random.Generator
) -> DiscreteInput:
    """Apply one token-level mutation operator.

    synonym_replace swaps one token for a uniformly drawn synonym (positions
    without synonyms are skipped); random_insert duplicates an existing token
    into a uniform position; random_swap exchanges two distinct positions;
    random_delete removes one position.  When the operator cannot change the
    input (empty sequence, no synonyms, single-token swap) the input is
    returned with unchanged=True.
    """
    if op not in DISCRETE_OPS:
        raise ValueError(f"unknown mutation operator {op!r}; expected one of {DISCRETE_OPS}")
    tokens = list(inp.tokens)
    if not tokens:
        return replace(inp, unchanged=True)

    if op == "synonym_replace":
        candidates = [i for i, tok in enumerate(tokens) if inp.synonyms.get(tok)]
        if not candidates:
            return replace(inp, unchanged=True)
        pos = int(rng.choice(np.asarray(candidates)))
        syns = inp.synonyms[tokens[pos]]
        tokens[pos] = int(syns[int(rng.integers(len(syns)))])
    elif op == "random_insert":
        tok = tokens[int(rng.integers(len(tokens)))]
        pos = int(rng.integers(len(tokens) + 1))
        tokens.insert(pos, tok)
    elif op == "random_swap":
        if len(tokens) < 2:
            return replace(inp, unchanged=True)
        i = int(rng.integers(len(tokens)))
        j = int(rng.integers(len(tokens) - 1))
        if j >= i:
            j += 1
        tokens[i], tokens[j] = tokens[j], tokens[i]
    else:  # random_delete
        pos = int(rng.integers(len(tokens)))
        del tokens[pos]

    return replace(inp, tokens=tuple(tokens), unchanged=False)
