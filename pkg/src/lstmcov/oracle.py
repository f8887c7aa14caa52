"""Validity and adversariality judgments for mutated inputs.

A mutant is valid when it lies within a closed Euclidean norm ball of
configurable radius around its seed.  A valid mutant is adversarial when the
model predicts a different class for it than for the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ModelSpec, run_forward

__all__ = ["OracleConfig", "Verdict", "judge", "adversarial_curve"]


@dataclass(frozen=True)
class OracleConfig:
    """Norm-ball oracle settings.  Only the Euclidean (l2) distance is supported."""

    radius: float
    distance: str = "l2"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.distance != "l2":
            raise ValueError(f"unsupported distance {self.distance!r}; only 'l2' is available")


@dataclass(frozen=True)
class Verdict:
    """Outcome of judging one mutant against its seed.

    adversarial implies valid, and implies the classes differ.
    """

    valid: bool
    adversarial: bool
    distance: float
    seed_class: int
    mutant_class: int

    def __post_init__(self):
        if self.adversarial and not self.valid:
            raise ValueError("adversarial verdicts must be valid")
        if self.adversarial and self.seed_class == self.mutant_class:
            raise ValueError("adversarial verdicts must change the predicted class")
        if self.distance < 0:
            raise ValueError("distance must be nonnegative")


def judge(model: ModelSpec, seed: Sequence, mutant: Sequence, cfg: OracleConfig) -> Verdict:
    """Judge a mutant: within the closed ball it is valid; if, in addition, the
    model's predicted class changed relative to the seed, it is adversarial."""
    seed = np.asarray(seed, dtype=np.float64)
    mutant = np.asarray(mutant, dtype=np.float64)
    if seed.shape != mutant.shape:
        raise ValueError(f"seed shape {seed.shape} != mutant shape {mutant.shape}")
    distance = float(np.linalg.norm((mutant - seed).ravel()))
    valid = distance <= cfg.radius
    seed_class = run_forward(model, seed).predicted_class
    mutant_class = run_forward(model, mutant).predicted_class
    return Verdict(
        valid=valid,
        adversarial=valid and mutant_class != seed_class,
        distance=distance,
        seed_class=seed_class,
        mutant_class=mutant_class,
    )


def adversarial_curve(
    verdicts: Sequence[Verdict], radii: Sequence[float]
) -> tuple[list[int], float]:
    """Count misclassified mutants inside each radius of an ascending grid.

    Returns (counts, area): counts[j] is the number of verdicts whose class
    changed and whose distance is <= radii[j]; area is the trapezoidal area
    under the (radius, count) polyline.
    """
    radii = [float(r) for r in radii]
    if any(b < a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be ascending")
    flipped = sorted(v.distance for v in verdicts if v.seed_class != v.mutant_class)
    counts = [int(np.searchsorted(flipped, r, side="right")) for r in radii]
    area = float(np.trapezoid(counts, radii)) if len(radii) > 1 else 0.0
    return counts, area
