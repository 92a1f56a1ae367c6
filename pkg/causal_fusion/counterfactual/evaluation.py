"""
Query evaluation on FSCMs and aggregation over the compatible runs.
"""

from __future__ import annotations

import logging
from typing import Optional

from ..emcc.schemas import CompatibleSet
from ..errors import IncompatibilityError, ModelError, UndefinedConditionalError
from ..fusion.merging import OBSERVATIONAL_STATE, regime_structure
from ..inference.elimination import plan_elimination, variable_elimination
from ..inference.factor import Factor
from ..inference.likelihood import structural_factors
from ..scm.schemas import FSCM, PSCM
from .networks import augment_query_node, multi_world_network, world_name
from .schemas import LoweredQuery, QueryResult, QuerySpec

logger = logging.getLogger(__name__)


def query_context(model: PSCM, q: QuerySpec) -> tuple[Optional[int], Optional[int]]:
    """
    Regime and chance group a query is evaluated in. Without an explicit
    regime the base equations are used; study-specific chances default to
    the group of the observational regime.
    """
    regime = model.regime
    if regime is None:
        if q.context:
            raise ModelError("Query context given for a model without regime index")
        return None, None
    w_state = q.context.get(regime.index_var)
    w = None
    if w_state is not None:
        w = _position(w_state, regime.w_states, regime.index_var)
    group = None
    if regime.chance_index_var is not None:
        chance_state = q.context.get(regime.chance_index_var)
        if chance_state is not None:
            group = _position(chance_state, regime.chance_groups, regime.chance_index_var)
        elif w is not None:
            group = regime.group_of_state[w]
        elif OBSERVATIONAL_STATE in regime.w_states:
            group = regime.group_of_state[regime.w_states.index(OBSERVATIONAL_STATE)]
        else:
            raise ModelError(
                f"The query must name a {regime.index_var} or {regime.chance_index_var} state: chances are study-specific"
            )
    return w, group


def _position(state, domain, variable: str) -> int:
    if isinstance(state, int):
        if not 0 <= state < len(domain):
            raise ModelError(f"State {state} out of range for {variable}")
        return state
    if state not in domain:
        raise ModelError(f"Unknown {variable} state {state!r}; expected one of {list(domain)}")
    return list(domain).index(state)


class CompiledQuery:
    """
    The θ-independent part of a query: the multi-world network, its query
    node, structural factors and elimination plan. Evaluating it on a new
    FSCM only swaps the exogenous PMFs.
    """

    def __init__(self, model: PSCM, q: QuerySpec):
        self.query = q
        self.source = model
        self.w, self.group = query_context(model, q)
        self.structure = regime_structure(model, self.w)
        self.lowered: LoweredQuery = q.lower(self.structure)
        network = multi_world_network(self.structure, self.lowered.worlds)
        event = [(world_name(v, k), s) for v, s, k in self.lowered.target]
        self.network, self.node = augment_query_node(network, event)
        self.evidence = {world_name(v, k): s for v, s, k in self.lowered.evidence}
        for (v, s, k) in self.lowered.evidence:
            if self.evidence[world_name(v, k)] != s:
                raise ModelError(f"Contradictory evidence on {world_name(v, k)}")
        self.factors = structural_factors(self.network)
        self.exogenous = self.structure.exogenous
        self.plan = plan_elimination(
            self.factors + [Factor.ones((u,), (self.network.card(u),)) for u in self.network.exogenous],
            (self.node,),
            self.evidence,
        )

    def _pmfs(self, fscm: FSCM) -> dict:
        model = fscm.pscm
        pmfs = {}
        for u in self.exogenous:
            theta = fscm.theta(u)
            if u in model.chance_parents:
                theta = theta[self.group]
            pmfs[u] = theta
        return pmfs

    def evaluate(self, fscm: FSCM) -> float:
        """
        P(target | evidence) under the exogenous PMFs of `fscm`.

        Raises:
            UndefinedConditionalError: if the evidence has probability zero
        """
        pmfs = self._pmfs(fscm)
        factors = list(self.factors)
        for u in self.network.exogenous:
            theta = pmfs.get(u)
            factors.append(Factor((u,), (self.network.card(u),), theta if theta is not None else [1.0]))
        joint = variable_elimination(factors, (self.node,), self.evidence, self.plan)
        total = joint.total()
        if total <= 0:
            raise UndefinedConditionalError(f"The evidence {self.evidence} has probability zero")
        return min(1.0, max(0.0, float(joint.values[1] / total)))


def evaluate_query(model: FSCM, q: QuerySpec) -> float:
    """Value of `q` under one FSCM (auxiliary models are read through the query context)."""
    return CompiledQuery(model.pscm, q).evaluate(model)


def aggregate_range(
    compatible_set: CompatibleSet,
    q: QuerySpec,
    accept_near_best: bool = False,
) -> QueryResult:
    """
    Evaluate `q` on every run that reached the global maximum; the range of
    the values is an inner approximation of the query bounds.

    With accept_near_best, when no run reached λ*, the runs within the
    accepted gap of the best run are used instead.
    """
    if not compatible_set.results:
        raise IncompatibilityError("No EM run to aggregate")
    runs = compatible_set.global_max_runs()
    if not runs and accept_near_best:
        runs = compatible_set.near_best_runs()
        logger.warning(f"No run reached λ*; using {len(runs)} runs within tolerance of the best one")
    if not runs:
        raise IncompatibilityError(
            "No EM run reached the maximum likelihood: this points to wrong modelling or to insufficient data"
        )
    compiled = CompiledQuery(runs[0].fscm.pscm, q)
    values, indices, undefined = [], [], 0
    for run in runs:
        try:
            values.append(compiled.evaluate(run.fscm))
            indices.append(run.run_index)
        except UndefinedConditionalError:
            undefined += 1
    if not values:
        raise UndefinedConditionalError("The query evidence has probability zero under every compatible run")
    result = QueryResult(
        per_run=values,
        run_indices=indices,
        n_excluded=len(compatible_set.results) - len(runs),
        n_undefined=undefined,
    )
    logger.info(
        f"{q.kind} range [{result.lower:.4f}, {result.upper:.4f}] over {len(values)} runs "
        f"({result.n_excluded} excluded, {undefined} undefined)"
    )
    return result
