import numpy as np
import pytest

from lstmcov import (
    CampaignConfig,
    CountStop,
    CoverageConfig,
    CoverageState,
    CoverageStop,
    MutationConfig,
    OracleConfig,
    TestCase,
    TestSuite,
    Verdict,
    coverage_rates,
    load_suite,
    minimal_test_suite,
    run_campaign,
    run_forward,
    save_suite,
    select_seeds,
    trace_conditions,
    update_onestep_coverage,
    update_sequence_coverage,
)
from lstmcov.harness import config_echo

from conftest import make_zero_model
from oracles import minimum_cover_size


def small_campaign_config(**overrides) -> CampaignConfig:
    defaults = dict(
        stop=CountStop(12),
        coverage=CoverageConfig(alpha_h=0.2, alpha_f=0.45, symbol_count=2,
                                seq_range=(2, 5)),
        mutation=MutationConfig(epsilon_range=(0.02, 0.08), tau_range=(1, 3)),
        oracle=OracleConfig(radius=1.5),
        seeds_rng=0,
        seed_count=10,
        mutations_per_seed=3,
    )
    defaults.update(overrides)
    return CampaignConfig(**defaults)


class TestSelectSeeds:
    def test_full_count_is_a_permutation(self, small_dataset):
        seeds = select_seeds(small_dataset, len(small_dataset), seeds_rng=0)
        assert sorted(i for i, _ in seeds) == list(range(len(small_dataset)))

    def test_indices_match_inputs(self, small_dataset):
        for idx, x in select_seeds(small_dataset, 10, seeds_rng=4):
            assert np.array_equal(x, small_dataset[idx])

    def test_deterministic_per_seed(self, small_dataset):
        a = select_seeds(small_dataset, 10, seeds_rng=7)
        b = select_seeds(small_dataset, 10, seeds_rng=7)
        assert [i for i, _ in a] == [i for i, _ in b]

    def test_different_seeds_differ(self, small_dataset):
        a = [i for i, _ in select_seeds(small_dataset, 20, seeds_rng=0)]
        b = [i for i, _ in select_seeds(small_dataset, 20, seeds_rng=1)]
        assert a != b

    def test_no_replacement(self, small_dataset):
        seeds = select_seeds(small_dataset, 25, seeds_rng=3)
        indices = [i for i, _ in seeds]
        assert len(set(indices)) == len(indices)

    def test_overdraw_rejected(self, small_dataset):
        with pytest.raises(ValueError, match="cannot select"):
            select_seeds(small_dataset, len(small_dataset) + 1, seeds_rng=0)


class TestConfigValidation:
    def test_stop_type_checked(self):
        with pytest.raises(TypeError, match="stop"):
            small_campaign_config(stop="count:5")

    def test_count_stop_bounds(self):
        CountStop(0)
        with pytest.raises(ValueError):
            CountStop(-1)

    def test_coverage_stop_bounds(self):
        CoverageStop("cell", 1.0)
        with pytest.raises(ValueError, match="metric"):
            CoverageStop("branch", 0.5)
        with pytest.raises(ValueError, match="rate"):
            CoverageStop("cell", 0.0)
        with pytest.raises(ValueError, match="rate"):
            CoverageStop("cell", 1.1)

    def test_workers_excluded_from_echo(self):
        a = config_echo(small_campaign_config(workers=1))
        b = config_echo(small_campaign_config(workers=7))
        assert a == b
        assert "workers" not in a


class TestRunCampaign:
    def test_zero_count_terminates_immediately(self, small_model, small_dataset):
        cfg = small_campaign_config(stop=CountStop(0))
        result = run_campaign(small_model, small_dataset, cfg)
        assert result.report.status == "count_reached"
        assert result.suite.cases == ()
        assert result.report.attempts == 0
        assert len(result.report.records) == 1
        assert result.report.records[0].test_cases_so_far == 0

    def test_count_stop_fills_suite(self, small_model, small_dataset):
        result = run_campaign(small_model, small_dataset, small_campaign_config())
        assert result.report.status == "count_reached"
        assert len(result.suite.cases) == 12
        assert result.report.valid_count == 12
        assert result.report.attempts >= 12

    def test_case_ids_are_ordinal(self, small_model, small_dataset):
        result = run_campaign(small_model, small_dataset, small_campaign_config())
        assert [c.id for c in result.suite.cases] == list(range(1, 13))

    def test_every_case_is_valid_within_radius(self, small_model, small_dataset):
        cfg = small_campaign_config()
        result = run_campaign(small_model, small_dataset, cfg)
        for case in result.suite.cases:
            assert case.verdict.valid
            assert case.verdict.distance <= cfg.oracle.radius

    def test_records_counter_strictly_increases(self, small_model, small_dataset):
        result = run_campaign(small_model, small_dataset, small_campaign_config())
        counters = [r.test_cases_so_far for r in result.report.records]
        assert counters == list(range(len(counters)))

    def test_rates_and_adversarials_nondecreasing(self, small_model, small_dataset):
        result = run_campaign(small_model, small_dataset, small_campaign_config())
        records = result.report.records
        for prev, cur in zip(records, records[1:]):
            assert cur.cell_rate >= prev.cell_rate
            assert cur.gate_rate >= prev.gate_rate
            assert cur.seq_pos_rate >= prev.seq_pos_rate
            assert cur.seq_neg_rate >= prev.seq_neg_rate
            assert cur.adversarial_count >= prev.adversarial_count

    def test_zero_model_produces_no_adversarials(self, small_dataset):
        m = make_zero_model(n=6, d=5, units=4, classes=3)
        cfg = small_campaign_config(stop=CountStop(8))
        result = run_campaign(m, small_dataset, cfg)
        assert len(result.suite.cases) == 8
        assert result.report.adversarial_count == 0
        assert all(not c.verdict.adversarial for c in result.suite.cases)
        # zero gradient means the mutant is the seed itself
        assert all(c.verdict.distance == 0.0 for c in result.suite.cases)

    def test_replaying_suite_reproduces_final_rates(self, small_model, small_dataset):
        cfg = small_campaign_config()
        result = run_campaign(small_model, small_dataset, cfg)
        state = CoverageState(timesteps=small_model.timesteps)
        state.symbolizer = result.suite.symbolizer
        for case in result.suite.cases:
            trace = run_forward(small_model, case.input)
            update_onestep_coverage(state, trace, cfg.coverage)
            update_sequence_coverage(state, trace, cfg.coverage)
        final = result.report.records[-1]
        assert coverage_rates(state, cfg.coverage) == (
            final.cell_rate, final.gate_rate, final.seq_pos_rate, final.seq_neg_rate)

    def test_satisfied_conditions_match_trace(self, small_model, small_dataset):
        cfg = small_campaign_config()
        result = run_campaign(small_model, small_dataset, cfg)
        state = CoverageState(timesteps=small_model.timesteps)
        state.symbolizer = result.suite.symbolizer
        for case in result.suite.cases:
            trace = run_forward(small_model, case.input)
            assert case.satisfied_conditions == trace_conditions(trace, state, cfg.coverage)

    def test_provenance_records_sga_parameters(self, small_model, small_dataset):
        cfg = small_campaign_config()
        result = run_campaign(small_model, small_dataset, cfg)
        for case in result.suite.cases:
            prov = case.mutation_provenance
            assert prov["engine"] == "sga"
            assert 0.02 <= prov["epsilon"] <= 0.08
            assert prov["tau"] in (1, 2, 3)

    def test_reachable_coverage_target_stops_early(self, small_model, small_dataset):
        cfg = small_campaign_config(stop=CoverageStop("gate", 0.2))
        result = run_campaign(small_model, small_dataset, cfg)
        assert result.report.status == "target_reached"
        final = result.report.records[-1]
        assert final.gate_rate >= 0.2
        assert result.report.attempts < 10 * 3  # stopped before the full pass

    def test_unreachable_coverage_target_is_one_pass(self, small_model, small_dataset):
        cfg = small_campaign_config(
            stop=CoverageStop("cell", 1.0),
            coverage=CoverageConfig(alpha_h=1e9, alpha_f=0.45, seq_range=(2, 5)))
        result = run_campaign(small_model, small_dataset, cfg)
        assert result.report.status == "target_not_reached"
        assert result.report.attempts == 10 * 3
        assert result.report.records[-1].cell_rate == 0.0

    def test_empty_dataset_rejected(self, small_model):
        with pytest.raises(ValueError, match="empty"):
            run_campaign(small_model, [], small_campaign_config())

    def test_misshapen_dataset_rejected(self, small_model):
        bad = [np.zeros((3, 3))]
        with pytest.raises(ValueError, match="expects"):
            run_campaign(small_model, bad, small_campaign_config())

    def test_suite_carries_config_and_symbolizer(self, small_model, small_dataset):
        cfg = small_campaign_config()
        result = run_campaign(small_model, small_dataset, cfg)
        assert result.suite.config is cfg
        assert result.suite.symbolizer is not None
        lo, hi = cfg.coverage.seq_range
        assert set(result.suite.symbolizer.boundaries_pos) == set(range(lo, hi + 1))


class TestDeterminism:
    def _export_bytes(self, result, tmp_path, tag):
        from lstmcov import export
        out = tmp_path / tag
        out.mkdir()
        log = out / "record.txt"
        export(result.report, log, suite=result.suite)
        return {p.name: p.read_bytes() for p in sorted(out.iterdir())}

    def test_identical_runs_are_byte_identical(self, small_model, small_dataset, tmp_path):
        cfg = small_campaign_config()
        a = run_campaign(small_model, small_dataset, cfg)
        b = run_campaign(small_model, small_dataset, cfg)
        assert self._export_bytes(a, tmp_path, "a") == self._export_bytes(b, tmp_path, "b")

    def test_worker_count_does_not_change_outputs(self, small_model, small_dataset, tmp_path):
        serial = run_campaign(small_model, small_dataset, small_campaign_config(workers=1))
        threaded = run_campaign(small_model, small_dataset, small_campaign_config(workers=4))
        assert self._export_bytes(serial, tmp_path, "serial") == \
            self._export_bytes(threaded, tmp_path, "threaded")

    def test_mutation_seed_changes_results(self, small_model, small_dataset):
        a = run_campaign(small_model, small_dataset,
                         small_campaign_config(mutation=MutationConfig(rng_seed=0)))
        b = run_campaign(small_model, small_dataset,
                         small_campaign_config(mutation=MutationConfig(rng_seed=1)))
        pa = [c.mutation_provenance["epsilon"] for c in a.suite.cases]
        pb = [c.mutation_provenance["epsilon"] for c in b.suite.cases]
        assert pa != pb


def dummy_case(case_id: int, conditions) -> TestCase:
    verdict = Verdict(valid=True, adversarial=False, distance=0.0,
                      seed_class=0, mutant_class=0)
    return TestCase(id=case_id, seed_index=0, input=np.zeros((2, 2)),
                    mutation_provenance={"engine": "sga", "epsilon": 0.1, "tau": 1},
                    verdict=verdict, satisfied_conditions=frozenset(conditions))


def dummy_suite(condition_sets) -> TestSuite:
    cases = [dummy_case(i + 1, s) for i, s in enumerate(condition_sets)]
    cfg = small_campaign_config()
    return TestSuite(cases=tuple(cases), config=cfg, symbolizer=None)


class TestMinimalSuite:
    def test_superset_case_wins(self):
        suite = dummy_suite([{"cell:1", "gate:1"}, {"cell:1"}, {"gate:1"}])
        kept = minimal_test_suite(suite)
        assert [c.id for c in kept.cases] == [1]
        assert kept.condition_union() == suite.condition_union()

    def test_disjoint_cases_all_kept(self):
        suite = dummy_suite([{"cell:1"}, {"cell:2"}, {"cell:3"}])
        kept = minimal_test_suite(suite)
        assert [c.id for c in kept.cases] == [1, 2, 3]

    def test_tie_prefers_lower_id(self):
        suite = dummy_suite([{"cell:1"}, {"cell:1"}])
        kept = minimal_test_suite(suite)
        assert [c.id for c in kept.cases] == [1]

    def test_empty_conditions_drop_everything(self):
        suite = dummy_suite([set(), set()])
        kept = minimal_test_suite(suite)
        assert kept.cases == ()

    def test_kept_cases_stay_in_campaign_order(self):
        suite = dummy_suite([{"a"}, {"b", "c", "d"}, {"e", "f"}, {"a", "e"}])
        kept = minimal_test_suite(suite)
        ids = [c.id for c in kept.cases]
        assert ids == sorted(ids)

    def test_union_always_preserved_and_optimal_on_small_instances(self):
        rng = np.random.Generator(np.random.PCG64(99))
        conditions = [f"c:{i}" for i in range(16)]
        for _ in range(40):
            k = int(rng.integers(1, 13))
            sets = []
            for _ in range(k):
                size = int(rng.integers(0, 6))
                sets.append(set(rng.choice(conditions, size=size, replace=False).tolist()))
            suite = dummy_suite(sets)
            kept = minimal_test_suite(suite)
            assert kept.condition_union() == suite.condition_union()
            assert len(kept.cases) == minimum_cover_size(sets)

    def test_campaign_flag_applies_minimization(self, small_model, small_dataset):
        full = run_campaign(small_model, small_dataset, small_campaign_config())
        reduced = run_campaign(small_model, small_dataset,
                               small_campaign_config(minimal_suite=True))
        assert reduced.report.suite_size <= len(full.suite.cases)
        assert reduced.report.valid_count == full.report.valid_count
        assert reduced.suite.condition_union() == full.suite.condition_union()


class TestSuiteInvariantsAndSerialization:
    def test_invalid_case_rejected(self):
        bad = TestCase(id=1, seed_index=0, input=np.zeros((2, 2)),
                       mutation_provenance={},
                       verdict=Verdict(valid=False, adversarial=False, distance=9.0,
                                       seed_class=0, mutant_class=0),
                       satisfied_conditions=frozenset())
        with pytest.raises(ValueError, match="valid"):
            TestSuite(cases=(bad,), config=small_campaign_config(), symbolizer=None)

    def test_case_input_is_frozen(self):
        case = dummy_case(1, {"cell:1"})
        with pytest.raises(ValueError):
            case.input[0, 0] = 5.0

    def test_save_load_round_trip(self, small_model, small_dataset, tmp_path):
        cfg = small_campaign_config()
        result = run_campaign(small_model, small_dataset, cfg)
        path = tmp_path / "suite.json"
        save_suite(result.suite, path)
        again = load_suite(path)
        assert len(again.cases) == len(result.suite.cases)
        for a, b in zip(again.cases, result.suite.cases):
            assert a.id == b.id
            assert a.seed_index == b.seed_index
            assert np.array_equal(a.input, b.input)
            assert a.mutation_provenance == b.mutation_provenance
            assert a.verdict == b.verdict
            assert a.satisfied_conditions == b.satisfied_conditions
        assert again.config == cfg
        for t, bounds in result.suite.symbolizer.boundaries_pos.items():
            assert np.array_equal(again.symbolizer.boundaries_pos[t], bounds)

    def test_save_is_deterministic(self, small_model, small_dataset, tmp_path):
        result = run_campaign(small_model, small_dataset, small_campaign_config())
        p1 = tmp_path / "one.json"
        p2 = tmp_path / "two.json"
        save_suite(result.suite, p1)
        save_suite(result.suite, p2)
        assert p1.read_bytes() == p2.read_bytes()
