"""
Canonical structural equations and c-component decomposition.

A canonical exogenous variable enumerates every deterministic function from
the endogenous parents of its children to the children themselves. Function
j of a child V with k parent configurations maps configuration c to the c-th
digit of j written in base |Ω_V| (least-significant digit first). When one
exogenous variable feeds several children, its state is a mixed-radix
number with one digit per child, the first child (in topological order)
being the least significant.
"""

import logging
import math
from typing import Mapping, Sequence

import networkx as nx
import numpy as np

from ...errors import CardinalityOverflowError, ModelError
from ..schemas import (
    PSCM,
    CausalGraph,
    CComponent,
    CComponentDecomposition,
    StructuralEquation,
    Variable,
)

logger = logging.getLogger(__name__)

# Largest cardinality we can index with numpy int64
MAX_CARDINALITY = np.iinfo(np.int64).max


def canonical_cardinality(child_card: int, endo_parent_cards: Sequence[int]) -> int:
    """
    Number of deterministic functions from the joint parent states to the child.

    Raises:
        CardinalityOverflowError: if |Ω_V|^(∏ |Ω_W|) does not fit an int64
    """
    if child_card < 1 or any(card < 1 for card in endo_parent_cards):
        raise ValueError("Cardinalities must be positive")
    configurations = math.prod(endo_parent_cards)
    if child_card == 1:
        return 1
    # Compare exponents in log space first so huge powers are never built
    if configurations * math.log2(child_card) > 64:
        raise CardinalityOverflowError(
            f"Canonical cardinality {child_card}^{configurations} overflows the platform integer"
        )
    result = child_card**configurations
    if result > MAX_CARDINALITY:
        raise CardinalityOverflowError(
            f"Canonical cardinality {child_card}^{configurations} overflows the platform integer"
        )
    return result


def enumerate_functions(child_card: int, n_configurations: int) -> np.ndarray:
    """
    All functions from n_configurations parent configurations to the child,
    as an array shaped (child_card ** n_configurations, n_configurations).
    """
    count = canonical_cardinality(child_card, [n_configurations])
    index = np.arange(count, dtype=np.int64)[:, None]
    place = child_card ** np.arange(n_configurations, dtype=np.int64)[None, :]
    return (index // place) % child_card


def build_canonical_pscm(
    endo_graph: CausalGraph,
    exo_assignment: Mapping[str, str],
    endogenous: Sequence[Variable],
) -> PSCM:
    """
    Build the canonical PSCM of an endogenous DAG.

    Args:
        endo_graph: Graph over the endogenous variables only
        exo_assignment: Exogenous parent name for every endogenous variable
            (shared names give quasi-Markovian models)
        endogenous: The endogenous variables (cardinalities, state names)

    Returns:
        PSCM whose exogenous variables index every function of their children
    """
    by_name = {v.name: v for v in endogenous}
    missing_vars = [n for n in endo_graph.nodes if n not in by_name]
    if missing_vars:
        raise ModelError(f"No variable declaration for {missing_vars}")
    missing = [n for n in endo_graph.nodes if n not in exo_assignment]
    if missing:
        raise ModelError(f"Exogenous assignment missing for {missing}")
    if not endo_graph.is_acyclic():
        raise ModelError("Endogenous graph has a cycle")

    order = endo_graph.topological_order()
    exo_children: dict[str, list[str]] = {}
    for name in order:
        exo_children.setdefault(exo_assignment[name], []).append(name)

    # Per child: number of functions, and the radix place of its digit in U
    n_functions: dict[str, int] = {}
    for name in order:
        parent_cards = [by_name[p].cardinality for p in endo_graph.parents(name)]
        n_functions[name] = canonical_cardinality(by_name[name].cardinality, parent_cards)

    exo_cards: dict[str, int] = {}
    places: dict[str, int] = {}
    for exo, children in exo_children.items():
        card = 1
        for child in children:
            places[child] = card
            card *= n_functions[child]
            if card > MAX_CARDINALITY:
                raise CardinalityOverflowError(f"Cardinality of {exo} overflows the platform integer")
        exo_cards[exo] = card

    equations = []
    for name in order:
        exo = exo_assignment[name]
        parents = endo_graph.parents(name)
        parent_cards = [by_name[p].cardinality for p in parents]
        n_configurations = math.prod(parent_cards)
        functions = enumerate_functions(by_name[name].cardinality, n_configurations)
        u = np.arange(exo_cards[exo], dtype=np.int64)
        digit = (u // places[name]) % n_functions[name]
        # table[config, u] = f_digit(u)(config), row-major with U as the last parent
        table = functions[digit].T
        equations.append(
            StructuralEquation(child=name, parent_order=(*parents, exo), table=tuple(table.reshape(-1).tolist()))
        )

    variables = [by_name[name] for name in endo_graph.nodes]
    variables += [Variable(name=exo, cardinality=card, kind="exogenous") for exo, card in exo_cards.items()]
    arcs = list(endo_graph.arcs) + [(exo_assignment[name], name) for name in order]
    logger.debug(f"Canonical PSCM built with exogenous cardinalities {exo_cards}")
    return PSCM(variables=tuple(variables), arcs=tuple(arcs), equations=tuple(equations))


def c_components(model: PSCM) -> CComponentDecomposition:
    """Connected components of the graph once endogenous-to-endogenous arcs are removed."""
    pruned = nx.Graph()
    pruned.add_nodes_from(v.name for v in model.variables)
    endogenous = set(model.endogenous)
    for parent, child in model.arcs:
        if parent in endogenous and child in endogenous:
            continue
        # Coarsening arcs W' -> U only index chances; they do not couple components
        if model.chance_parents.get(child) == parent:
            continue
        pruned.add_edge(parent, child)

    order = model.topological_order
    position = {name: i for i, name in enumerate(order)}
    components = []
    for nodes in nx.connected_components(pruned):
        endo = tuple(sorted((n for n in nodes if n in endogenous), key=position.__getitem__))
        exo = tuple(n for n in model.exogenous if n in nodes)
        frontier_set = set(endo)
        for name in endo:
            frontier_set.update(model.endogenous_parents(name))
        frontier = tuple(sorted(frontier_set, key=position.__getitem__))
        predecessors = {
            name: tuple(w for w in frontier if position[w] < position[name])
            for name in endo
        }
        components.append(CComponent(endogenous=endo, exogenous=exo, frontier=frontier, predecessors=predecessors))

    def sort_key(component: CComponent) -> int:
        members = component.endogenous or component.exogenous
        return min(position[n] for n in members)

    return CComponentDecomposition(components=tuple(sorted(components, key=sort_key)))
