"""Campaign orchestration: seed selection, mutation loop, stopping, minimization.

A campaign round-robins over a deterministically selected seed set.  Each seed
visit produces mutations_per_seed gradient-ascent mutants; every mutant is
judged by the norm-ball oracle, valid ones enter the suite and update the
coverage registries, and one report record is appended per accepted case.

Visits may be computed by a thread pool, but results are committed strictly in
(visit, mutant) order from per-visit random streams derived by key splitting,
so the worker count never changes any output byte.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .coverage import (
    CoverageConfig,
    CoverageState,
    Symbolizer,
    coverage_rates,
    coverage_times,
    fit_symbolizer,
    trace_conditions,
    update_onestep_coverage,
    update_sequence_coverage,
)
from .model import ModelSpec, run_forward
from .mutation import MutationConfig, sample_params, sga_mutate
from .oracle import OracleConfig, Verdict, adversarial_curve, judge
from .reporting import CampaignReport, Snapshot, append_record

__all__ = [
    "CountStop",
    "CoverageStop",
    "CampaignConfig",
    "TestCase",
    "TestSuite",
    "CampaignResult",
    "select_seeds",
    "run_campaign",
    "minimal_test_suite",
    "save_suite",
    "load_suite",
]

COVERAGE_METRICS = ("cell", "gate", "seq_pos", "seq_neg")

# Safety valve for count-bounded campaigns: if the oracle rejects nearly every
# mutant the run still terminates, with an explicit status.
ATTEMPT_BUDGET_BASE = 1000
ATTEMPT_BUDGET_PER_CASE = 100

CURVE_POINTS = 21


@dataclass(frozen=True)
class CountStop:
    """Stop once the suite holds `count` valid test cases."""

    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"count must be nonnegative, got {self.count}")


@dataclass(frozen=True)
class CoverageStop:
    """Stop once the named metric's rate reaches `rate`."""

    metric: str
    rate: float

    def __post_init__(self):
        if self.metric not in COVERAGE_METRICS:
            raise ValueError(f"metric must be one of {COVERAGE_METRICS}, got {self.metric!r}")
        if not 0.0 < self.rate <= 1.0:
            raise ValueError(f"rate must lie in (0, 1], got {self.rate}")


@dataclass(frozen=True)
class CampaignConfig:
    """Everything a campaign needs besides the model and dataset.

    seed_count of None means min(100, dataset size).  workers only controls
    parallelism; it never affects results.
    """

    stop: Union[CountStop, CoverageStop]
    coverage: CoverageConfig
    mutation: MutationConfig
    oracle: OracleConfig
    seeds_rng: int = 0
    seed_count: Optional[int] = None
    mutations_per_seed: int = 5
    minimal_suite: bool = False
    workers: int = 1

    def __post_init__(self):
        if not isinstance(self.stop, (CountStop, CoverageStop)):
            raise TypeError("stop must be a CountStop or CoverageStop")
        if self.mutations_per_seed < 1:
            raise ValueError(f"mutations_per_seed must be positive, got {self.mutations_per_seed}")
        if self.seed_count is not None and self.seed_count < 1:
            raise ValueError(f"seed_count must be positive, got {self.seed_count}")
        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")


@dataclass(frozen=True)
class TestCase:
    """One accepted (valid) mutant with its provenance and judgments."""

    __test__ = False  # keep pytest from collecting this as a test class

    id: int
    seed_index: int
    input: np.ndarray
    mutation_provenance: dict
    verdict: Verdict
    satisfied_conditions: frozenset[str]

    def __post_init__(self):
        arr = np.asarray(self.input, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "input", arr)
        object.__setattr__(self, "satisfied_conditions", frozenset(self.satisfied_conditions))


@dataclass(frozen=True)
class TestSuite:
    """Ordered valid test cases plus the config and symbolizer that produced them."""

    __test__ = False  # keep pytest from collecting this as a test class

    cases: tuple[TestCase, ...]
    config: CampaignConfig
    symbolizer: Optional[Symbolizer]

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(self.cases))
        for case in self.cases:
            if not case.verdict.valid:
                raise ValueError(f"test case {case.id} is not valid; suites hold valid cases only")

    def condition_union(self) -> frozenset[str]:
        out: set[str] = set()
        for case in self.cases:
            out |= case.satisfied_conditions
        return frozenset(out)


class CampaignResult(NamedTuple):
    suite: TestSuite
    report: CampaignReport


def select_seeds(dataset, count: int, seeds_rng: int) -> list[tuple[int, np.ndarray]]:
    """Sample `count` distinct inputs uniformly, deterministically per seeds_rng."""
    inputs = [np.asarray(x, dtype=np.float64) for x in dataset]
    if count > len(inputs):
        raise ValueError(f"cannot select {count} seeds from a dataset of {len(inputs)}")
    if count < 0:
        raise ValueError(f"count must be nonnegative, got {count}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seeds_rng)))
    indices = rng.choice(len(inputs), size=count, replace=False)
    return [(int(i), inputs[int(i)]) for i in indices]


def _visit_rng(mutation_seed: int, visit: int, k: int) -> np.random.Generator:
    # Key-split stream: one independent generator per (visit, mutant) task.
    ss = np.random.SeedSequence(entropy=mutation_seed, spawn_key=(visit, k))
    return np.random.Generator(np.random.PCG64(ss))


def _run_visit(model: ModelSpec, cfg: CampaignConfig,
               visit: int, seed_input: np.ndarray) -> list[tuple]:
    """Generate and judge all mutants for one seed visit (thread-safe)."""
    out = []
    for k in range(cfg.mutations_per_seed):
        rng = _visit_rng(cfg.mutation.rng_seed, visit, k)
        epsilon, tau = sample_params(cfg.mutation, rng)
        mutant = sga_mutate(model, seed_input, epsilon, tau, cfg.mutation)
        verdict = judge(model, seed_input, mutant, cfg.oracle)
        trace = run_forward(model, mutant) if verdict.valid else None
        out.append((k, epsilon, tau, mutant, verdict, trace))
    return out


def config_echo(cfg: CampaignConfig) -> dict[str, str]:
    """Flat, ordered key/value view of a campaign config for the record log.

    The worker count is deliberately excluded: it must not affect outputs.
    """
    if isinstance(cfg.stop, CountStop):
        stop = f"count:{cfg.stop.count}"
    else:
        stop = f"coverage:{cfg.stop.metric}:{cfg.stop.rate!r}"
    cov, mut, orc = cfg.coverage, cfg.mutation, cfg.oracle
    return {
        "stop": stop,
        "alpha_h": repr(cov.alpha_h),
        "alpha_f": repr(cov.alpha_f),
        "symbol_count": str(cov.symbol_count),
        "seq_range": f"{cov.seq_range[0]},{cov.seq_range[1]}",
        "target_layer": str(cov.target_layer),
        "oracle_radius": repr(orc.radius),
        "distance": orc.distance,
        "epsilon_range": f"{mut.epsilon_range[0]!r},{mut.epsilon_range[1]!r}",
        "tau_range": f"{mut.tau_range[0]},{mut.tau_range[1]}",
        "clamp": f"{mut.clamp[0]!r},{mut.clamp[1]!r}",
        "mutation_rng_seed": str(mut.rng_seed),
        "seeds_rng": str(cfg.seeds_rng),
        "seed_count": "-" if cfg.seed_count is None else str(cfg.seed_count),
        "mutations_per_seed": str(cfg.mutations_per_seed),
        "minimal_suite": "1" if cfg.minimal_suite else "0",
        "sga_label": "seed_predicted",
    }


def run_campaign(model: ModelSpec, dataset, cfg: CampaignConfig,
                 extra_echo: Optional[dict] = None) -> CampaignResult:
    """Run a full testing campaign; returns the suite and its report.

    The result is a pure function of (model, dataset, cfg): per-mutant random
    streams are derived by key splitting and results are committed in visit
    order, so neither thread scheduling nor the worker count can change it.
    """
    inputs = [np.asarray(x, dtype=np.float64) for x in dataset]
    if not inputs:
        raise ValueError("dataset is empty")
    for x in inputs:
        model.check_input(x)

    seed_count = cfg.seed_count if cfg.seed_count is not None else min(100, len(inputs))
    seeds = select_seeds(inputs, seed_count, cfg.seeds_rng)

    n = model.timesteps
    state = CoverageState(timesteps=n)
    seed_traces = [run_forward(model, x) for _, x in seeds]
    state.symbolizer = fit_symbolizer(seed_traces, cfg.coverage)

    echo = dict(extra_echo or {})
    echo.update(config_echo(cfg))
    report = CampaignReport(config_echo=echo, symbolizer=state.symbolizer)
    append_record(report, Snapshot(0, *coverage_rates(state, cfg.coverage)))

    cases: list[TestCase] = []
    adv_distances: list[float] = []
    attempts = 0
    status: Optional[str] = None

    if isinstance(cfg.stop, CountStop):
        if cfg.stop.count == 0:
            status = "count_reached"
            max_visits = 0
        else:
            budget = ATTEMPT_BUDGET_BASE + ATTEMPT_BUDGET_PER_CASE * cfg.stop.count
            max_visits = -(-budget // cfg.mutations_per_seed)
    else:
        # Coverage-target campaigns make at most one full pass over the seeds.
        max_visits = len(seeds)

    def commit(visit: int, seed_index: int, results: list[tuple]) -> Optional[str]:
        nonlocal attempts
        for k, epsilon, tau, mutant, verdict, trace in results:
            attempts += 1
            if not verdict.valid:
                continue
            conditions = trace_conditions(trace, state, cfg.coverage)
            update_onestep_coverage(state, trace, cfg.coverage)
            update_sequence_coverage(state, trace, cfg.coverage)
            if verdict.adversarial:
                adv_distances.append(verdict.distance)
            cases.append(TestCase(
                id=len(cases) + 1,
                seed_index=seed_index,
                input=mutant,
                mutation_provenance={"engine": "sga", "epsilon": epsilon, "tau": tau},
                verdict=verdict,
                satisfied_conditions=frozenset(conditions),
            ))
            rates = coverage_rates(state, cfg.coverage)
            append_record(report, Snapshot(len(cases), *rates, tuple(adv_distances)))
            if isinstance(cfg.stop, CountStop):
                if len(cases) >= cfg.stop.count:
                    return "count_reached"
            else:
                if rates[COVERAGE_METRICS.index(cfg.stop.metric)] >= cfg.stop.rate:
                    return "target_reached"
        return None

    if status is None:
        status = _drive(model, cfg, seeds, max_visits, commit)
    if status is None:
        if isinstance(cfg.stop, CountStop):
            status = "attempt_budget_exhausted"
        else:
            status = "target_not_reached"

    suite = TestSuite(cases=tuple(cases), config=cfg, symbolizer=state.symbolizer)
    if cfg.minimal_suite:
        suite = minimal_test_suite(suite)

    radii = np.linspace(0.0, cfg.oracle.radius, CURVE_POINTS)
    counts, auc = adversarial_curve([c.verdict for c in cases], radii)
    report.coverage_tables = coverage_times(state)
    report.curve_radii = [float(r) for r in radii]
    report.curve_counts = counts
    report.curve_auc = auc
    report.attempts = attempts
    report.valid_count = len(cases)
    report.status = status
    report.suite_size = len(suite.cases)
    return CampaignResult(suite=suite, report=report)


def _drive(model, cfg, seeds, max_visits, commit) -> Optional[str]:
    """Execute visits (possibly in parallel) and commit them in order."""
    if max_visits == 0 or not seeds:
        return None
    if cfg.workers == 1:
        for visit in range(max_visits):
            seed_index, seed_input = seeds[visit % len(seeds)]
            outcome = commit(visit, seed_index, _run_visit(model, cfg, visit, seed_input))
            if outcome is not None:
                return outcome
        return None

    window = 2 * cfg.workers
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        pending: deque = deque()
        next_visit = 0
        try:
            while pending or next_visit < max_visits:
                while next_visit < max_visits and len(pending) < window:
                    seed_index, seed_input = seeds[next_visit % len(seeds)]
                    fut = pool.submit(_run_visit, model, cfg, next_visit, seed_input)
                    pending.append((next_visit, seed_index, fut))
                    next_visit += 1
                visit, seed_index, fut = pending.popleft()
                outcome = commit(visit, seed_index, fut.result())
                if outcome is not None:
                    return outcome
        finally:
            for _, _, fut in pending:
                fut.cancel()
    return None


EXACT_COVER_MAX_CASES = 12
EXACT_COVER_MAX_CONDITIONS = 16


def _exact_cover(cases: Sequence[TestCase], universe: set, limit: int):
    """Smallest sub-collection covering `universe`, or None if `limit` suffices.

    Searches subset sizes in ascending order, combinations in ascending-id
    order, so the answer is deterministic.  Only called on tiny instances.
    """
    for k in range(1, limit):
        for combo in itertools.combinations(cases, k):
            covered: set = set()
            for case in combo:
                covered |= case.satisfied_conditions
            if covered >= universe:
                return list(combo)
    return None


def minimal_test_suite(suite: TestSuite) -> TestSuite:
    """Reduce a suite to a small subset covering the same conditions.

    Greedy set cover: repeatedly keep the case covering the most still
    uncovered conditions (ties favor the lower id) until the kept cases cover
    everything the full suite covers.  On suites small enough to solve
    exhaustively (at most 12 cases and 16 distinct conditions) a strictly
    suboptimal greedy answer is replaced by a true minimum cover.  Kept cases
    stay in campaign order with original ids.
    """
    universe = set(suite.condition_union())
    remaining = set(universe)
    candidates = list(suite.cases)
    kept: list[TestCase] = []
    while remaining:
        # candidates stay in ascending-id order, so the first maximum wins ties
        best = None
        best_gain = 0
        for case in candidates:
            gain = len(case.satisfied_conditions & remaining)
            if gain > best_gain:
                best = case
                best_gain = gain
        if best is None:
            break
        kept.append(best)
        candidates.remove(best)
        remaining -= best.satisfied_conditions
    if (len(suite.cases) <= EXACT_COVER_MAX_CASES
            and len(universe) <= EXACT_COVER_MAX_CONDITIONS and len(kept) > 1):
        exact = _exact_cover(suite.cases, universe, len(kept))
        if exact is not None:
            kept = exact
    kept.sort(key=lambda c: c.id)
    return TestSuite(cases=tuple(kept), config=suite.config, symbolizer=suite.symbolizer)


# ---------------------------------------------------------------------------
# Suite serialization
# ---------------------------------------------------------------------------

def _config_to_dict(cfg: CampaignConfig) -> dict:
    if isinstance(cfg.stop, CountStop):
        stop = {"kind": "count", "count": cfg.stop.count}
    else:
        stop = {"kind": "coverage", "metric": cfg.stop.metric, "rate": cfg.stop.rate}
    return {
        "stop": stop,
        "coverage": {
            "alpha_h": cfg.coverage.alpha_h,
            "alpha_f": cfg.coverage.alpha_f,
            "symbol_count": cfg.coverage.symbol_count,
            "seq_range": list(cfg.coverage.seq_range),
            "target_layer": cfg.coverage.target_layer,
        },
        "mutation": {
            "epsilon_range": list(cfg.mutation.epsilon_range),
            "tau_range": list(cfg.mutation.tau_range),
            "clamp": list(cfg.mutation.clamp),
            "rng_seed": cfg.mutation.rng_seed,
        },
        "oracle": {"radius": cfg.oracle.radius, "distance": cfg.oracle.distance},
        "seeds_rng": cfg.seeds_rng,
        "seed_count": cfg.seed_count,
        "mutations_per_seed": cfg.mutations_per_seed,
        "minimal_suite": cfg.minimal_suite,
    }


def _config_from_dict(doc: dict) -> CampaignConfig:
    stop_doc = doc["stop"]
    if stop_doc["kind"] == "count":
        stop: Union[CountStop, CoverageStop] = CountStop(stop_doc["count"])
    else:
        stop = CoverageStop(stop_doc["metric"], stop_doc["rate"])
    cov = doc["coverage"]
    mut = doc["mutation"]
    return CampaignConfig(
        stop=stop,
        coverage=CoverageConfig(
            alpha_h=cov["alpha_h"], alpha_f=cov["alpha_f"],
            symbol_count=cov["symbol_count"], seq_range=tuple(cov["seq_range"]),
            target_layer=cov["target_layer"],
        ),
        mutation=MutationConfig(
            epsilon_range=tuple(mut["epsilon_range"]), tau_range=tuple(mut["tau_range"]),
            clamp=tuple(mut["clamp"]), rng_seed=mut["rng_seed"],
        ),
        oracle=OracleConfig(radius=doc["oracle"]["radius"], distance=doc["oracle"]["distance"]),
        seeds_rng=doc["seeds_rng"],
        seed_count=doc["seed_count"],
        mutations_per_seed=doc["mutations_per_seed"],
        minimal_suite=doc["minimal_suite"],
    )


def save_suite(suite: TestSuite, path) -> None:
    """Serialize a suite (inputs included) to JSON, deterministically."""
    sym = suite.symbolizer
    doc = {
        "config": _config_to_dict(suite.config),
        "symbolizer": None if sym is None else {
            "symbol_count": sym.symbol_count,
            "pos": {str(t): np.asarray(b).tolist() for t, b in sorted(sym.boundaries_pos.items())},
            "neg": {str(t): np.asarray(b).tolist() for t, b in sorted(sym.boundaries_neg.items())},
        },
        "cases": [
            {
                "id": c.id,
                "seed_index": c.seed_index,
                "input": c.input.tolist(),
                "mutation_provenance": c.mutation_provenance,
                "verdict": {
                    "valid": c.verdict.valid,
                    "adversarial": c.verdict.adversarial,
                    "distance": c.verdict.distance,
                    "seed_class": c.verdict.seed_class,
                    "mutant_class": c.verdict.mutant_class,
                },
                "satisfied_conditions": sorted(c.satisfied_conditions),
            }
            for c in suite.cases
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_suite(path) -> TestSuite:
    """Read a serialized suite back; inverse of save_suite."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    sym = None
    if doc.get("symbolizer") is not None:
        s = doc["symbolizer"]
        sym = Symbolizer(
            symbol_count=s["symbol_count"],
            boundaries_pos={int(t): np.asarray(b) for t, b in s["pos"].items()},
            boundaries_neg={int(t): np.asarray(b) for t, b in s["neg"].items()},
        )
    cases = []
    for c in doc["cases"]:
        v = c["verdict"]
        cases.append(TestCase(
            id=c["id"],
            seed_index=c["seed_index"],
            input=np.asarray(c["input"], dtype=np.float64),
            mutation_provenance=c["mutation_provenance"],
            verdict=Verdict(
                valid=v["valid"], adversarial=v["adversarial"], distance=v["distance"],
                seed_class=v["seed_class"], mutant_class=v["mutant_class"],
            ),
            satisfied_conditions=frozenset(c["satisfied_conditions"]),
        ))
    return TestSuite(cases=tuple(cases), config=_config_from_dict(doc["config"]), symbolizer=sym)
