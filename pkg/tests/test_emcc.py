"""
Tests for the EM runs and their collection.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from causal_fusion.bench import BenchConfig, sample_er_pscm, sample_ground_truth
from causal_fusion.emcc import (
    CompatibleSet,
    CompiledData,
    EmccConfig,
    EmRunResult,
    compatibility_gap,
    em_step_biased,
    em_step_unbiased,
    emcc,
    initialize_exogenous,
    run_em,
    run_rng,
)
from causal_fusion.fusion import Selector, embed_selector, partition_by_selector
from causal_fusion.inference import log_likelihood, log_likelihood_biased, max_log_likelihood
from causal_fusion.scm import FSCM, PSCM, Dataset, StructuralEquation, Variable
from causal_fusion.scm.tools import sample_endogenous


@pytest.fixture
def chain_data(chain_fscm):
    return sample_endogenous(chain_fscm, 400, np.random.default_rng(5))


class TestConfig:
    def test_strict_by_default(self):
        config = EmccConfig()
        assert config.gap_per_record == 0.0
        assert config.near_best_tolerance(10_000) == pytest.approx(config.ll_tolerance)

    def test_near_best_tolerance_scales_with_records(self):
        config = EmccConfig(ll_tolerance=1e-6, gap_per_record=1e-5)
        assert config.near_best_tolerance(10) == pytest.approx(1e-4)
        assert config.near_best_tolerance(0) == pytest.approx(1e-6)

    def test_custom_init_needs_pmfs(self):
        with pytest.raises(ValidationError):
            EmccConfig(init="custom")

    def test_camel_case_aliases(self):
        config = EmccConfig.model_validate({"maxIterations": 7, "runs": 2})
        assert config.max_iterations == 7

    def test_runs_must_be_positive(self):
        with pytest.raises(ValidationError):
            EmccConfig(runs=0)


class TestInitialisation:
    def test_points_on_the_simplex(self, drug_trial_model):
        theta = initialize_exogenous(drug_trial_model, 0)
        assert theta["U1"].shape == (64,)
        assert theta["U1"].sum() == pytest.approx(1.0)
        assert np.all(theta["U2"] > 0)

    def test_same_seed_same_point(self, drug_trial_model):
        a = initialize_exogenous(drug_trial_model, run_rng(3, 1))
        b = initialize_exogenous(drug_trial_model, run_rng(3, 1))
        c = initialize_exogenous(drug_trial_model, run_rng(3, 2))
        assert np.array_equal(a["U1"], b["U1"])
        assert not np.array_equal(a["U1"], c["U1"])


class TestSteps:
    def test_unbiased_step_does_not_decrease_likelihood(self, chain_model, chain_data):
        theta = initialize_exogenous(chain_model, 1)
        before = log_likelihood(FSCM(pscm=chain_model, exo_pmfs=theta), chain_data)
        after = log_likelihood(FSCM(pscm=chain_model, exo_pmfs=em_step_unbiased(chain_model, theta, chain_data)), chain_data)
        assert after >= before - 1e-9

    def test_biased_step_does_not_decrease_likelihood(self, chain_model, chain_data):
        selector = Selector.from_table(chain_model, ("X", "Y"), [1, 0, 0, 1])
        embedded = embed_selector(chain_model, selector)
        biased = partition_by_selector(chain_data, selector)
        theta = initialize_exogenous(embedded, 2)
        before = log_likelihood_biased(FSCM(pscm=embedded, exo_pmfs=theta), biased)
        stepped = em_step_biased(embedded, theta, biased)
        after = log_likelihood_biased(FSCM(pscm=embedded, exo_pmfs=stepped), biased)
        assert after >= before - 1e-9

    def test_e_step_likelihood_matches_elimination(self, drug_trial_model, observational):
        theta = initialize_exogenous(drug_trial_model, 4)
        result = CompiledData(drug_trial_model, observational).e_step(theta)
        expected = log_likelihood(FSCM(pscm=drug_trial_model, exo_pmfs=theta), observational)
        assert result.log_likelihood == pytest.approx(expected)
        assert result.skipped == 0

    def test_identity_model_step_is_the_frequency(self):
        model = PSCM(
            variables=(
                Variable(name="X", cardinality=2, kind="endogenous"),
                Variable(name="U", cardinality=2, kind="exogenous"),
            ),
            arcs=(("U", "X"),),
            equations=(StructuralEquation(child="X", parent_order=("U",), table=(0, 1)),),
        )
        data = Dataset.from_counts(("X",), {(0,): 3, (1,): 1})
        stepped = em_step_unbiased(model, {"U": np.array([0.5, 0.5])}, data)
        assert stepped["U"] == pytest.approx([0.75, 0.25])

    def test_precompiled_records_give_the_same_step(self, drug_trial_model, observational):
        theta = initialize_exogenous(drug_trial_model, 6)
        compiled = CompiledData(drug_trial_model, observational)
        fresh = em_step_unbiased(drug_trial_model, theta, observational)
        reused = em_step_unbiased(drug_trial_model, theta, observational, compiled=compiled)
        again = em_step_unbiased(drug_trial_model, reused, observational, compiled=compiled)
        for name in theta:
            assert np.allclose(fresh[name], reused[name])
        assert log_likelihood(FSCM(pscm=drug_trial_model, exo_pmfs=again), observational) >= log_likelihood(
            FSCM(pscm=drug_trial_model, exo_pmfs=reused), observational
        ) - 1e-9


class TestRunEM:
    def test_trace_is_monotone(self, drug_trial_model, observational):
        result = run_em(drug_trial_model, observational, config=EmccConfig(runs=1, max_iterations=100))
        assert len(result.ll_trace) >= 2
        assert np.all(np.diff(result.ll_trace) >= -1e-8)

    def test_final_likelihood_below_maximum(self, drug_trial_model, observational):
        ll_star = max_log_likelihood(drug_trial_model, observational)
        result = run_em(drug_trial_model, observational, config=EmccConfig(runs=1))
        assert result.final_ll <= ll_star + 1e-6

    def test_iteration_budget(self, drug_trial_model, observational):
        result = run_em(drug_trial_model, observational, config=EmccConfig(max_iterations=1, saddle_restarts=0))
        assert result.iterations <= 1
        assert result.status in ("max_iters", "global_max", "saddle_suspect")

    def test_gap_to_the_maximum_is_rejected_by_default(self, drug_trial_model, observational):
        ll_star = max_log_likelihood(drug_trial_model, observational)
        config = EmccConfig(max_iterations=300, saddle_restarts=0)
        result = run_em(drug_trial_model, observational, config=config, ll_star=ll_star + 1e-3)
        assert ll_star + 1e-3 - result.final_ll > config.ll_tolerance
        assert result.status != "global_max"

    def test_custom_start(self, chain_model, chain_data):
        start = {"UX": np.array([0.5, 0.5]), "UY": np.array([0.5, 0.5])}
        config = EmccConfig(init="custom", initial_pmfs={k: v.tolist() for k, v in start.items()}, runs=2, saddle_restarts=0)
        collected = emcc(chain_model, chain_data, config=config)
        first, second = collected.results
        assert np.allclose(first.theta("UY"), second.theta("UY"))


class TestEmcc:
    def test_results_ordered_and_reproducible(self, drug_trial_model, observational):
        config = EmccConfig(runs=3, seed=9, max_iterations=200)
        a = emcc(drug_trial_model, observational, config=config)
        b = emcc(drug_trial_model, observational, config=config)
        assert [r.run_index for r in a.results] == [0, 1, 2]
        for x, y in zip(a.results, b.results):
            assert np.array_equal(x.theta("U1"), y.theta("U1"))

    def test_hooks_see_every_run(self, chain_model, chain_data):
        seen = []
        emcc(chain_model, chain_data, hooks=[lambda r: seen.append(r.run_index)], config=EmccConfig(runs=4))
        assert seen == [0, 1, 2, 3]

    def test_compatible_data_reach_the_maximum(self, drug_trial_model, observational):
        collected = emcc(drug_trial_model, observational, config=EmccConfig(runs=3, seed=1))
        assert collected.compatible
        assert sum(collected.status_counts().values()) == 3
        for run in collected.global_max_runs():
            assert collected.ll_star - run.final_ll <= collected.tolerance
            assert compatibility_gap(run.fscm, observational) < 0.02

    def test_likelihood_bookkeeping(self, chain_model, chain_data):
        collected = emcc(chain_model, chain_data, config=EmccConfig(runs=2))
        assert collected.n_records == 400
        assert collected.best_ll <= collected.ll_star + 1e-6

    @pytest.mark.slow
    def test_worker_count_does_not_change_results(self, drug_trial_model, observational):
        serial = emcc(drug_trial_model, observational, config=EmccConfig(runs=4, seed=2, threads=1))
        parallel = emcc(drug_trial_model, observational, config=EmccConfig(runs=4, seed=2, threads=2))
        for x, y in zip(serial.results, parallel.results):
            assert x.run_index == y.run_index
            assert np.allclose(x.theta("U1"), y.theta("U1"))
            assert x.status == y.status

    def test_near_best_runs_use_their_own_gap(self, chain_fscm):
        runs = [
            EmRunResult(run_index=k, fscm=chain_fscm, iterations=1, ll_trace=[ll], status="max_iters")
            for k, ll in enumerate([-10.0, -10.001])
        ]
        strict = CompatibleSet(results=runs, ll_star=-9.0, n_records=100, tolerance=1e-6)
        relaxed = CompatibleSet(results=runs, ll_star=-9.0, n_records=100, tolerance=1e-6, near_best_tolerance=1e-2)
        assert not strict.compatible
        assert [r.run_index for r in strict.near_best_runs()] == [0]
        assert [r.run_index for r in relaxed.near_best_runs()] == [0, 1]


# ═══════════════════════════════════════════════════════════════════
# Random models
# ═══════════════════════════════════════════════════════════════════


def random_problem(seed: int, biased: bool):
    """A small random model with 300 sampled records, optionally behind a random selector."""
    model = sample_er_pscm(BenchConfig(n_endogenous=(3, 4), max_exo_card=16), seed)
    truth = sample_ground_truth(model, seed)
    rng = np.random.default_rng(seed)
    data = sample_endogenous(truth, 300, rng)
    if not biased:
        return model, data
    scope = model.endogenous[:2]
    table = np.ones(math.prod(model.card(v) for v in scope), dtype=np.int64)
    table[int(rng.integers(table.size))] = 0
    selector = Selector.from_table(model, scope, table)
    partition = partition_by_selector(data, selector)
    if partition.n_selected == 0:
        pytest.skip("every sampled record fell in the rejected stratum")
    return embed_selector(model, selector), partition


class TestRandomModels:
    @pytest.mark.parametrize("biased", [False, True], ids=["unbiased", "biased"])
    @pytest.mark.parametrize("seed", range(8))
    def test_ascent_is_monotone_and_bounded(self, seed, biased):
        model, data = random_problem(seed, biased)
        ll_star = max_log_likelihood(model, data)
        result = run_em(model, data, config=EmccConfig(max_iterations=200, seed=seed))
        assert np.all(np.diff(result.ll_trace) >= -1e-6)
        assert result.final_ll <= ll_star + 1e-6

    @pytest.mark.slow
    @pytest.mark.parametrize("biased", [False, True], ids=["unbiased", "biased"])
    @pytest.mark.parametrize("seed", range(8, 40))
    def test_ascent_is_monotone_and_bounded_wide_sweep(self, seed, biased):
        model, data = random_problem(seed, biased)
        ll_star = max_log_likelihood(model, data)
        collected = emcc(model, data, config=EmccConfig(runs=3, max_iterations=300, seed=seed))
        for result in collected.results:
            assert np.all(np.diff(result.ll_trace) >= -1e-6)
            assert result.final_ll <= ll_star + 1e-6
