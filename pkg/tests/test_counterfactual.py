"""
Tests for counterfactual queries: lowering, multi-world networks, exact
evaluation on FSCMs, range aggregation and the brute-force oracle.

The two-variable model indexes U by u = t + 2j: Treatment = t and
Survival = (j >> Treatment) & 1, so u = 4 is a drug taker who survives
with the drug and dies without it.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from causal_fusion.counterfactual import (
    QUERY_NODE,
    CompiledQuery,
    QueryResult,
    QuerySpec,
    WorldEvent,
    aggregate_range,
    augment_query_node,
    brute_force_bounds,
    evaluate_query,
    multi_world_network,
    surgery,
    twin_network,
)
from causal_fusion.emcc import CompatibleSet, EmccConfig, EmRunResult, emcc
from causal_fusion.errors import BudgetExceededError, IncompatibilityError, ModelError, UndefinedConditionalError
from causal_fusion.scm import FSCM, Dataset
from causal_fusion.scm.tools import remove_exogenous_states


def point_mass(model, state: int) -> FSCM:
    pmf = np.zeros(model.card("U"))
    pmf[state] = 1.0
    return FSCM(pscm=model, exo_pmfs={"U": pmf})


@pytest.fixture
def treatment_survival(observational):
    return observational.project(["Treatment", "Survival"])


# ═══════════════════════════════════════════════════════════════════
# Query specification
# ═══════════════════════════════════════════════════════════════════


class TestQuerySpec:
    def test_pns_needs_cause_and_effect(self):
        with pytest.raises(ValidationError):
            QuerySpec(kind="PNS", cause="Treatment")

    def test_cause_and_effect_differ(self):
        with pytest.raises(ValidationError):
            QuerySpec(kind="PNS", cause="Treatment", effect="Treatment")

    def test_general_needs_target(self):
        with pytest.raises(ValidationError):
            QuerySpec(kind="general", worlds=[{"Treatment": 0}])

    def test_target_world_must_exist(self):
        with pytest.raises(ValidationError):
            QuerySpec(kind="general", target=[WorldEvent(variable="Survival", state=0, world=2)])

    def test_camel_case_states(self):
        q = QuerySpec.model_validate({"kind": "PN", "cause": "A", "effect": "B", "causeState": 0})
        assert q.cause_state == 0
        assert q.effect_state == 1

    def test_pns_lowering(self, two_variable_model, pns_query):
        lowered = pns_query.lower(two_variable_model)
        assert lowered.worlds == ({"Treatment": 0}, {"Treatment": 1})
        assert lowered.target == (("Survival", 0, 1), ("Survival", 1, 2))
        assert lowered.n_worlds == 3

    def test_pn_lowering_conditions_on_the_factual_world(self, two_variable_model):
        q = QuerySpec(kind="PN", cause="Treatment", effect="Survival", cause_state="drug", effect_state="survived")
        lowered = q.lower(two_variable_model)
        assert lowered.evidence == (("Treatment", 0, 0), ("Survival", 0, 0))
        assert lowered.target == (("Survival", 1, 1),)

    def test_unknown_state(self, two_variable_model):
        q = QuerySpec(kind="PNS", cause="Treatment", effect="Survival", cause_state="placebo")
        with pytest.raises(ModelError):
            q.lower(two_variable_model)


# ═══════════════════════════════════════════════════════════════════
# Networks
# ═══════════════════════════════════════════════════════════════════


class TestNetworks:
    def test_surgery_clamps_and_cuts(self, two_variable_model):
        cut = surgery(two_variable_model, {"Treatment": "no drug"})
        assert cut.parents("Treatment") == ()
        assert cut.equation("Treatment").table == (1,)
        assert ("U", "Treatment") not in cut.arcs

    def test_surgery_on_exogenous_rejected(self, two_variable_model):
        with pytest.raises(ModelError):
            surgery(two_variable_model, {"U": 0})

    def test_twin_network_shares_exogenous(self, two_variable_model):
        twin = twin_network(two_variable_model)
        assert set(twin.endogenous) == {"Treatment", "Survival", "Treatment'", "Survival'"}
        assert twin.exogenous == ("U",)
        assert set(twin.parents("Survival'")) == {"Treatment'", "U"}

    def test_query_node(self, two_variable_model):
        augmented, node = augment_query_node(two_variable_model, [("Treatment", 0), ("Survival", 1)])
        assert node == QUERY_NODE
        # parents (Treatment, Survival, U_Q): true only at (0, 1)
        assert augmented.equation(node).table == (0, 1, 0, 0)

    def test_contradictory_event(self, two_variable_model):
        with pytest.raises(ModelError):
            augment_query_node(two_variable_model, [("Survival", 0), ("Survival", 1)])

    def test_twin_network_mirrors_the_factual_world(self, drug_trial_model):
        twin = twin_network(drug_trial_model)
        assert twin.exogenous == drug_trial_model.exogenous
        for name in drug_trial_model.endogenous:
            factual = drug_trial_model.equation(name)
            copy = twin.equation(f"{name}'")
            mirrored = tuple(f"{p}'" if p in drug_trial_model.endogenous else p for p in factual.parent_order)
            assert copy.parent_order == mirrored
            assert copy.table == factual.table
            assert twin.equation(name) == factual

    def test_intervened_copy_is_screened_off(self, drug_trial_model):
        worlds = multi_world_network(drug_trial_model, [{"Treatment": "drug"}])
        assert worlds.parents("Treatment'") == ()
        assert worlds.equation("Treatment'").table == (0,)
        assert set(worlds.parents("Survival'")) == {"Treatment'", "Gender'", *drug_trial_model.exogenous_parents("Survival")}

    def test_surgery_keeps_the_other_equations(self, drug_trial_model):
        cut = surgery(drug_trial_model, {"Treatment": "drug"})
        assert cut.parents("Treatment") == ()
        for name in ("Gender", "Survival"):
            assert cut.equation(name) == drug_trial_model.equation(name)


# ═══════════════════════════════════════════════════════════════════
# Evaluation
# ═══════════════════════════════════════════════════════════════════


class TestEvaluation:
    def test_pns_of_a_responder(self, two_variable_model, pns_query):
        assert evaluate_query(point_mass(two_variable_model, 4), pns_query) == pytest.approx(1.0)

    def test_pns_of_an_always_survivor(self, two_variable_model, pns_query):
        assert evaluate_query(point_mass(two_variable_model, 0), pns_query) == pytest.approx(0.0)

    def test_pns_of_a_mixture(self, two_variable_model, pns_query):
        pmf = np.full(8, 1 / 8)
        assert evaluate_query(FSCM(pscm=two_variable_model, exo_pmfs={"U": pmf}), pns_query) == pytest.approx(0.25)

    def test_pn(self, two_variable_model):
        q = QuerySpec(kind="PN", cause="Treatment", effect="Survival", cause_state="drug", effect_state="survived")
        assert evaluate_query(point_mass(two_variable_model, 4), q) == pytest.approx(1.0)

    def test_ps_with_impossible_evidence(self, two_variable_model):
        q = QuerySpec(kind="PS", cause="Treatment", effect="Survival", cause_state="drug", effect_state="survived")
        with pytest.raises(UndefinedConditionalError):
            evaluate_query(point_mass(two_variable_model, 4), q)

    def test_general_interventional_query(self, two_variable_model):
        q = QuerySpec(
            kind="general",
            worlds=[{"Treatment": "no drug"}],
            target=[WorldEvent(variable="Survival", state="dead", world=1)],
        )
        assert evaluate_query(point_mass(two_variable_model, 4), q) == pytest.approx(1.0)

    def test_context_needs_a_fused_model(self, two_variable_model):
        q = QuerySpec(kind="PNS", cause="Treatment", effect="Survival", context={"W": "w_empty"})
        with pytest.raises(ModelError):
            CompiledQuery(two_variable_model, q)

    def test_compiled_query_is_reusable(self, two_variable_model, pns_query):
        compiled = CompiledQuery(two_variable_model, pns_query)
        assert compiled.evaluate(point_mass(two_variable_model, 4)) == pytest.approx(1.0)
        assert compiled.evaluate(point_mass(two_variable_model, 5)) == pytest.approx(1.0)
        assert compiled.evaluate(point_mass(two_variable_model, 6)) == pytest.approx(0.0)

    @pytest.mark.parametrize("seed", range(20))
    def test_pns_below_both_interventional_probabilities(self, two_variable_model, pns_query, seed):
        pmf = np.random.default_rng(seed).dirichlet(np.ones(8))
        fscm = FSCM(pscm=two_variable_model, exo_pmfs={"U": pmf})

        def under(treatment, survival):
            q = QuerySpec(
                kind="general",
                worlds=[{"Treatment": treatment}],
                target=[WorldEvent(variable="Survival", state=survival, world=1)],
            )
            return evaluate_query(fscm, q)

        pns = evaluate_query(fscm, pns_query)
        assert pns <= min(under("drug", "survived"), under("no drug", "dead")) + 1e-12


class TestAggregation:
    @staticmethod
    def _collected(model, statuses):
        results = [
            EmRunResult(run_index=i, fscm=point_mass(model, 4 + i), iterations=1, ll_trace=[-1.0], status=status)
            for i, status in enumerate(statuses)
        ]
        return CompatibleSet(results=results, ll_star=-1.0, n_records=10, tolerance=1e-6)

    def test_range_over_global_maxima(self, two_variable_model, pns_query):
        collected = self._collected(two_variable_model, ["global_max", "global_max", "max_iters"])
        result = aggregate_range(collected, pns_query)
        # u = 4, 5 are responders, u = 6 is not
        assert result.range == (1.0, 1.0)
        assert result.run_indices == [0, 1]
        assert result.n_excluded == 1

    def test_no_global_maximum(self, two_variable_model, pns_query):
        collected = self._collected(two_variable_model, ["max_iters", "saddle_suspect"])
        with pytest.raises(IncompatibilityError, match="wrong modelling or to insufficient data"):
            aggregate_range(collected, pns_query)

    def test_near_best_fallback(self, two_variable_model, pns_query):
        collected = self._collected(two_variable_model, ["max_iters", "saddle_suspect", "max_iters"])
        result = aggregate_range(collected, pns_query, accept_near_best=True)
        assert result.range == (0.0, 1.0)

    def test_undefined_runs_are_counted(self, two_variable_model):
        q = QuerySpec(kind="PS", cause="Treatment", effect="Survival", cause_state="drug", effect_state="survived")
        # u = 5 takes no drug and dies without it; u = 4 makes the evidence impossible
        collected = self._collected(two_variable_model, ["global_max", "global_max"])
        result = aggregate_range(collected, q)
        assert result.n_undefined == 1
        assert result.per_run == [pytest.approx(1.0)]

    def test_result_values_in_unit_interval(self):
        with pytest.raises(ValidationError):
            QueryResult(per_run=[1.2], run_indices=[0])
        with pytest.raises(ValidationError):
            QueryResult(per_run=[], run_indices=[])

    def test_identified_query_collapses_to_a_point(self, chain_model):
        """Without confounding, PNS(X -> Y) = P(UY = 0) is fixed by the observational joint."""
        data = Dataset.from_counts(("X", "Y"), {(0, 0): 24, (0, 1): 6, (1, 0): 14, (1, 1): 56})
        collected = emcc(chain_model, data, config=EmccConfig(runs=5, seed=3))
        query = QuerySpec(kind="PNS", cause="X", effect="Y", cause_state=1, effect_state=1)
        lower, upper = aggregate_range(collected, query).range
        assert lower == pytest.approx(0.8, abs=1e-6)
        assert upper == pytest.approx(lower, abs=1e-6)


# ═══════════════════════════════════════════════════════════════════
# Oracle
# ═══════════════════════════════════════════════════════════════════


class TestOracle:
    def test_observational_bounds(self, two_variable_model, treatment_survival, pns_query):
        """PNS from observational data alone lies in [0, P(x, y) + P(x', y')]."""
        bounds = brute_force_bounds(two_variable_model, treatment_survival, pns_query)
        assert bounds.method == "linprog"
        assert bounds.lower == pytest.approx(0.0, abs=0.01)
        assert bounds.upper == pytest.approx(0.4295, abs=0.01)

    def test_removing_a_responder_state_tightens_the_bounds(self, two_variable_model, treatment_survival, pns_query):
        reduced = remove_exogenous_states(two_variable_model, "U", [4])
        bounds = brute_force_bounds(reduced, treatment_survival, pns_query)
        assert bounds.lower == pytest.approx(0.0, abs=0.01)
        assert bounds.upper == pytest.approx(0.09, abs=0.01)

    def test_certifies_an_inner_range(self, two_variable_model, treatment_survival, pns_query):
        bounds = brute_force_bounds(two_variable_model, treatment_survival, pns_query, em_range=(0.05, 0.40))
        assert bounds.certified_inner is True
        outside = brute_force_bounds(two_variable_model, treatment_survival, pns_query, em_range=(0.0, 0.6))
        assert outside.certified_inner is False

    def test_budget(self, drug_trial_model, observational, pns_query):
        with pytest.raises(BudgetExceededError):
            brute_force_bounds(drug_trial_model, observational, pns_query, budget=10)

    def test_em_range_lies_inside_the_oracle(self, two_variable_model, treatment_survival, pns_query):
        bounds = brute_force_bounds(two_variable_model, treatment_survival, pns_query)
        collected = emcc(two_variable_model, treatment_survival, config=EmccConfig(runs=20, seed=11))
        lower, upper = aggregate_range(collected, pns_query).range
        assert bounds.lower - 0.01 <= lower <= upper <= bounds.upper + 0.01
