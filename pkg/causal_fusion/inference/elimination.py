"""
Variable elimination with a min-fill ordering.

The ordering depends only on factor scopes, so it can be planned once and
reused when only the numbers inside the factors change (one plan per query
structure, reused across every EM run).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import networkx as nx

from ..errors import FactorError
from .factor import Factor, product


@dataclass(frozen=True)
class EliminationPlan:
    targets: tuple[str, ...]
    evidence_vars: tuple[str, ...]
    order: tuple[str, ...]


def min_fill_order(scopes: Iterable[Sequence[str]], eliminate: Iterable[str]) -> list[str]:
    """Greedy min-fill elimination order; ties broken by variable name."""
    graph = nx.Graph()
    for scope in scopes:
        graph.add_nodes_from(scope)
        for i, a in enumerate(scope):
            for b in scope[i + 1 :]:
                graph.add_edge(a, b)
    remaining = set(eliminate)
    order = []
    while remaining:

        def fill_in(variable: str) -> int:
            neighbours = list(graph.neighbors(variable))
            return sum(
                1
                for i, a in enumerate(neighbours)
                for b in neighbours[i + 1 :]
                if not graph.has_edge(a, b)
            )

        best = min(remaining, key=lambda v: (fill_in(v), v))
        neighbours = list(graph.neighbors(best))
        for i, a in enumerate(neighbours):
            for b in neighbours[i + 1 :]:
                graph.add_edge(a, b)
        graph.remove_node(best)
        remaining.remove(best)
        order.append(best)
    return order


def plan_elimination(
    factors: Sequence[Factor],
    targets: Sequence[str],
    evidence_vars: Iterable[str] = (),
) -> EliminationPlan:
    evidence_vars = tuple(sorted(set(evidence_vars)))
    observed = set(evidence_vars)
    keep = set(targets)
    scopes = [tuple(v for v in f.scope if v not in observed) for f in factors]
    variables = {v for scope in scopes for v in scope}
    order = min_fill_order(scopes, variables - keep)
    return EliminationPlan(targets=tuple(targets), evidence_vars=evidence_vars, order=tuple(order))


def variable_elimination(
    factors: Sequence[Factor],
    targets: Sequence[str],
    evidence: Optional[Mapping[str, int]] = None,
    plan: Optional[EliminationPlan] = None,
) -> Factor:
    """
    Unnormalised joint over `targets` consistent with `evidence`.

    Returns an all-zero factor when the evidence has probability zero; the
    caller normalises.
    """
    evidence = dict(evidence or {})
    scope_vars = {v for f in factors for v in f.scope}
    unknown = [v for v in evidence if v not in scope_vars]
    if unknown:
        raise FactorError(f"Evidence on variables {unknown} that appear in no factor")
    cards = {v: c for f in factors for v, c in zip(f.scope, f.cards)}
    missing_targets = [t for t in targets if t not in cards]
    if missing_targets:
        raise FactorError(f"Targets {missing_targets} appear in no factor")

    if plan is None or set(plan.evidence_vars) != set(evidence) or tuple(plan.targets) != tuple(targets):
        plan = plan_elimination(factors, targets, evidence)

    pool = [f.reduce(evidence) for f in factors]
    for variable in plan.order:
        involved = [f for f in pool if variable in f.scope]
        if not involved:
            continue
        pool = [f for f in pool if variable not in f.scope]
        pool.append(product(involved).marginalize(variable))

    result = product(pool)
    leftover = [v for v in result.scope if v not in targets]
    if leftover:
        result = result.sum_out(leftover)

    # Observed targets were sliced away: put them back as point masses
    for target in targets:
        if target in evidence:
            result = result * Factor.indicator(target, cards[target], evidence[target])
    return result.transpose(targets)
