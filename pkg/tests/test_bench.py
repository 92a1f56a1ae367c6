"""
Tests for benchmark models, datasets, metrics and batch runs.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from causal_fusion.bench import (
    BenchConfig,
    BiasRecord,
    Roles,
    bias_records_to_frame,
    choose_roles,
    normalized_bias_effect,
    quartiles,
    records_to_frame,
    relative_shrink,
    run_bias_experiment,
    run_fusion_experiment,
    sample_datasets,
    sample_er_pscm,
    sample_ground_truth,
    stage_label,
    summarize_bias,
    summarize_shrinks,
)
from causal_fusion.config import BENCH_GAP_PER_RECORD
from causal_fusion.counterfactual import QuerySpec, aggregate_range
from causal_fusion.emcc import EmccConfig, emcc
from causal_fusion.errors import ModelError, UndefinedMetricError
from causal_fusion.fusion import embed_selector, incremental_removal_selectors, partition_by_selector
from causal_fusion.scm import CausalGraph, Variable
from causal_fusion.scm.tools import build_canonical_pscm, sample_endogenous, validate_pscm


@pytest.fixture
def confounded_chain():
    """X -> Z -> Y with X and Y sharing U1."""
    variables = [Variable(name=n, cardinality=2, kind="endogenous") for n in ("X", "Z", "Y")]
    graph = CausalGraph(nodes=("X", "Z", "Y"), arcs=(("X", "Z"), ("Z", "Y")))
    return build_canonical_pscm(graph, {"X": "U1", "Z": "U2", "Y": "U1"}, variables)


# ═══════════════════════════════════════════════════════════════════
# Metrics
# ═══════════════════════════════════════════════════════════════════


class TestRelativeShrink:
    def test_refined_range(self):
        assert relative_shrink((0.0, 0.43), (0.32, 0.42)) == pytest.approx(0.767, abs=1e-3)

    def test_unchanged_range(self):
        assert relative_shrink((0.2, 0.6), (0.2, 0.6)) == pytest.approx(0.0)

    def test_point_identification(self):
        assert relative_shrink((0.2, 0.6), (0.4, 0.4)) == pytest.approx(1.0)

    def test_zero_width_base(self):
        with pytest.raises(UndefinedMetricError):
            relative_shrink((0.3, 0.3), (0.3, 0.3))


class TestNormalizedBiasEffect:
    def test_widened_upper_endpoint(self):
        lower, upper = normalized_bias_effect((0.0, 0.73), (0.0, 0.43))
        assert lower == pytest.approx(0.0)
        assert upper == pytest.approx(0.526, abs=1e-3)

    def test_vacuous_biased_range(self):
        assert normalized_bias_effect((0.0, 1.0), (0.2, 0.6)) == pytest.approx((1.0, 1.0))

    def test_no_bias(self):
        assert normalized_bias_effect((0.2, 0.6), (0.2, 0.6)) == pytest.approx((0.0, 0.0))

    def test_vacuous_unbiased_endpoint(self):
        assert normalized_bias_effect((0.0, 1.0), (0.0, 1.0)) == (0.0, 0.0)
        with pytest.raises(UndefinedMetricError):
            normalized_bias_effect((0.1, 1.0), (0.0, 1.0))


class TestSummaries:
    def test_quartiles(self):
        summary = quartiles([1.0, 2.0, 3.0, 4.0, 5.0])
        assert summary["median"] == 3.0
        assert summary["n"] == 5

    def test_empty_quartiles(self):
        assert quartiles([]) == {"n": 0}

    def test_bias_bins(self):
        records = [
            BiasRecord(model_id=i, p_selected=p, biased=(0.0, 1.0), unbiased=(0.2, 0.6), lower_effect=1.0, upper_effect=1.0)
            for i, p in enumerate([0.1, 0.3, 0.35, 1.0])
        ]
        summary = summarize_bias(records)
        assert [entry["lower_effect"]["n"] for entry in summary] == [1, 2, 0, 1]

    def test_bias_frame(self):
        record = BiasRecord(model_id=0, p_selected=0.5, biased=(0.1, 0.9), unbiased=(0.2, 0.6), lower_effect=0.5, upper_effect=0.75)
        frame = bias_records_to_frame([record])
        assert frame.loc[0, "upper_effect"] == 0.75


# ═══════════════════════════════════════════════════════════════════
# Configuration and generation
# ═══════════════════════════════════════════════════════════════════


class TestBenchConfig:
    def test_aliases(self):
        config = BenchConfig.model_validate({"nEndogenous": [4, 6], "nModels": 3})
        assert config.n_endogenous == (4, 6)
        assert config.n_models == 3

    def test_too_few_endogenous(self):
        with pytest.raises(ValidationError):
            BenchConfig(n_endogenous=(2, 3))

    def test_empty_band(self):
        with pytest.raises(ValidationError):
            BenchConfig(selector_band=(0.5, 0.5))


class TestModelGeneration:
    @pytest.mark.parametrize("seed", range(5))
    def test_sampled_models_are_valid(self, seed):
        config = BenchConfig(n_endogenous=(5, 7))
        model = sample_er_pscm(config, seed)
        assert validate_pscm(model).is_valid, validate_pscm(model).summary()
        assert 5 <= len(model.endogenous) <= 7
        assert all(model.card(u) <= config.max_exo_card for u in model.exogenous)

    def test_same_seed_same_model(self):
        config = BenchConfig(n_endogenous=(5, 7))
        assert sample_er_pscm(config, 3).model_dump() == sample_er_pscm(config, 3).model_dump()

    def test_roles(self, confounded_chain):
        assert choose_roles(confounded_chain) == Roles(input="X", covariate="Z", target="Y")

    def test_roles_need_an_intermediate(self, drug_trial_model):
        with pytest.raises(ModelError):
            choose_roles(drug_trial_model)


class TestDatasetGeneration:
    @pytest.fixture
    def studies(self, confounded_chain):
        truth = sample_ground_truth(confounded_chain, 0)
        roles = choose_roles(confounded_chain)
        return sample_datasets(truth, roles, BenchConfig(n_endogenous=(3, 3)), 1000, 1)

    def test_sizes(self, studies):
        observational, interventional, biased = studies
        assert observational.dataset.total == 1000
        assert interventional.dataset.total == 1000
        assert biased.dataset.total == 1000

    def test_interventions_are_balanced(self, studies):
        _, interventional, biased = studies
        assert interventional.dataset.project(["X"]).as_dict() == {(0,): 500, (1,): 500}
        assert biased.dataset.project(["Z"]).as_dict() == {(0,): 500, (1,): 500}

    def test_selection_within_band(self, studies):
        biased = studies[2]
        assert biased.selector.scope == ("X", "Z", "Y")
        assert 0.25 <= biased.biased().p_selected <= 0.75


# ═══════════════════════════════════════════════════════════════════
# Batches
# ═══════════════════════════════════════════════════════════════════


SMOKE = BenchConfig(
    n_endogenous=(4, 5),
    dataset_size=(200, 300),
    n_models=2,
    runs=3,
    max_iterations=50,
    seed=7,
)


class TestBatches:
    def test_stage_labels(self):
        assert stage_label(("D_IB", "D_O")) == "IB+O"

    @pytest.mark.slow
    def test_fusion_batch(self):
        progress = []
        records = run_fusion_experiment(SMOKE, progress=lambda done, total: progress.append((done, total)))
        assert progress[-1] == (2, 2)
        for record in records:
            assert "global:I" in record.ranges
            assert all(0.0 <= lo <= hi <= 1.0 for lo, hi in record.ranges.values())
        frame = records_to_frame(records)
        assert len(frame) == len(records)

    @pytest.mark.slow
    def test_fusion_batch_is_reproducible(self):
        first = [r.model_dump() for r in run_fusion_experiment(SMOKE)]
        second = [r.model_dump() for r in run_fusion_experiment(SMOKE)]
        assert first == second

    @pytest.mark.slow
    def test_bias_batch(self):
        records = run_bias_experiment(SMOKE)
        for record in records:
            assert 0.0 <= record.p_selected <= 1.0
            assert np.isfinite(record.lower_effect)


# ═══════════════════════════════════════════════════════════════════
# Trends
# ═══════════════════════════════════════════════════════════════════


TREND = BenchConfig(
    n_endogenous=(4, 5),
    dataset_size=(1000, 1500),
    n_models=6,
    runs=20,
    max_iterations=300,
    seed=11,
    variants=("global",),
)


@pytest.mark.slow
class TestTrends:
    def test_more_studies_shrink_the_range_further(self):
        records = run_fusion_experiment(TREND)
        assert records
        summary = summarize_shrinks(records)
        for first in ("IB", "I"):
            middle = summary.get(f"global:{first}+O_vs_{first}", {"n": 0})
            full = summary.get(f"global:{'IB+O+I' if first == 'IB' else 'I+O+IB'}_vs_{first}", {"n": 0})
            if middle["n"]:
                assert middle["median"] >= -0.1
            if middle["n"] and full["n"]:
                assert full["median"] >= middle["median"] - 0.1

    def test_biased_ranges_widen_as_fewer_records_are_selected(self, confounded_chain):
        truth = sample_ground_truth(confounded_chain, 4)
        data = sample_endogenous(truth, 2000, np.random.default_rng(4))
        query = QuerySpec(kind="PNS", cause="X", effect="Y")
        config = EmccConfig(runs=40, max_iterations=500, gap_per_record=BENCH_GAP_PER_RECORD, seed=4)
        unbiased = aggregate_range(emcc(confounded_chain, data, config=config), query, accept_near_best=True).range

        ranges = []
        for selector in incremental_removal_selectors(confounded_chain, data, ("X", "Z")):
            embedded = embed_selector(confounded_chain, selector)
            biased = partition_by_selector(data, selector)
            collected = emcc(embedded, biased, config=config)
            ranges.append(aggregate_range(collected, query, accept_near_best=True).range)

        for lower, upper in ranges:
            assert lower <= unbiased[0] + 0.05
            assert upper >= unbiased[1] - 0.05
        widths = [upper - lower for lower, upper in ranges]
        for narrower, wider in zip(widths, widths[1:]):
            assert wider >= narrower - 0.05
