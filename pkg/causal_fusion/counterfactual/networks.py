"""
Graph surgery, multi-world (twin) networks and query indicator nodes.

Every function accepts a PSCM or an FSCM and returns the same kind of
model. Exogenous variables are never copied, so exogenous PMFs carry over
unchanged.
"""

from __future__ import annotations

from typing import Mapping, Sequence, TypeVar, Union

import numpy as np

from ..errors import ModelError
from ..scm.schemas import FSCM, PSCM, StateRef, StructuralEquation, Variable

Model = TypeVar("Model", PSCM, FSCM)

QUERY_NODE = "Q"


def _split(model: Union[PSCM, FSCM]) -> tuple[PSCM, dict]:
    if isinstance(model, FSCM):
        return model.pscm, dict(model.exo_pmfs)
    return model, {}


def _join(original: Union[PSCM, FSCM], pscm: PSCM, pmfs: dict):
    return FSCM(pscm=pscm, exo_pmfs=pmfs) if isinstance(original, FSCM) else pscm


def world_name(variable: str, world: int) -> str:
    """Name of the copy of `variable` in world `world` (world 0 keeps the name)."""
    return variable + "'" * world


def surgery(model: Model, do: Mapping[str, StateRef]) -> Model:
    """Replace the SE of each intervened variable by a constant and cut its incoming arcs."""
    pscm, pmfs = _split(model)
    clamped = {}
    for name, state in do.items():
        if not pscm.has_variable(name) or pscm.variable(name).kind != "endogenous":
            raise ModelError(f"Cannot intervene on {name!r}: not an endogenous variable")
        clamped[name] = pscm.variable(name).state_index(state)
    equations = tuple(
        StructuralEquation(child=e.child, parent_order=(), table=(clamped[e.child],)) if e.child in clamped else e
        for e in pscm.equations
    )
    arcs = tuple(arc for arc in pscm.arcs if arc[1] not in clamped)
    return _join(model, pscm.replace(equations=equations, arcs=arcs), pmfs)


def multi_world_network(model: Model, worlds: Sequence[Mapping[str, int]]) -> Model:
    """
    World 0 is the model itself; world k (1-based) is a copy of every
    endogenous variable, named with k primes, under the interventions
    worlds[k-1]. All worlds share the exogenous variables.
    """
    pscm, pmfs = _split(model)
    existing = set(pscm.variables_by_name)
    variables = list(pscm.variables)
    arcs = list(pscm.arcs)
    equations = list(pscm.equations)
    for k, interventions in enumerate(worlds, start=1):
        for name in interventions:
            if not pscm.has_variable(name) or pscm.variable(name).kind != "endogenous":
                raise ModelError(f"Cannot intervene on {name!r}: not an endogenous variable")
        rename = {v: world_name(v, k) for v in pscm.endogenous}
        clash = existing & set(rename.values())
        if clash:
            raise ModelError(f"World copies would shadow existing variables {sorted(clash)}")
        for name in pscm.endogenous:
            variable = pscm.variable(name)
            variables.append(variable.model_copy(update={"name": rename[name]}))
            if name in interventions:
                state = variable.state_index(interventions[name])
                equations.append(StructuralEquation(child=rename[name], parent_order=(), table=(state,)))
                continue
            equation = pscm.equation(name)
            parents = tuple(rename.get(p, p) for p in equation.parent_order)
            equations.append(StructuralEquation(child=rename[name], parent_order=parents, table=equation.table))
            arcs += [(p, rename[name]) for p in parents]
        existing |= set(rename.values())
    result = PSCM(variables=tuple(variables), arcs=tuple(arcs), equations=tuple(equations), chance_parents=pscm.chance_parents)
    return _join(model, result, pmfs)


def twin_network(model: Model) -> Model:
    """Factual world plus one primed copy with no intervention."""
    return multi_world_network(model, [{}])


def augment_query_node(
    model: Model, event: Sequence[tuple[str, StateRef]], name: str = QUERY_NODE
) -> tuple[Model, str]:
    """
    Add a Boolean child that is true iff every (variable, state) conjunct
    holds, with a one-state exogenous parent.
    """
    pscm, pmfs = _split(model)
    conjuncts: dict[str, int] = {}
    for variable, state in event:
        if not pscm.has_variable(variable) or pscm.variable(variable).kind != "endogenous":
            raise ModelError(f"Event references unknown endogenous variable {variable!r}")
        index = pscm.variable(variable).state_index(state)
        if conjuncts.get(variable, index) != index:
            raise ModelError(f"Contradictory event: {variable} cannot take two states at once")
        conjuncts[variable] = index
    if not conjuncts:
        raise ModelError("An event needs at least one conjunct")
    dummy = f"U_{name}"
    for taken in (name, dummy):
        if pscm.has_variable(taken):
            raise ModelError(f"Variable name {taken!r} already used by the model")

    scope = tuple(conjuncts)
    cards = [pscm.card(v) for v in scope]
    grid = np.indices(cards)
    holds = np.logical_and.reduce([grid[i] == conjuncts[v] for i, v in enumerate(scope)])
    augmented = pscm.replace(
        variables=(
            *pscm.variables,
            Variable(name=name, cardinality=2, kind="endogenous"),
            Variable(name=dummy, cardinality=1, kind="exogenous"),
        ),
        arcs=(*pscm.arcs, *((v, name) for v in scope), (dummy, name)),
        equations=(
            *pscm.equations,
            StructuralEquation(child=name, parent_order=(*scope, dummy), table=tuple(holds.astype(int).reshape(-1).tolist())),
        ),
    )
    if isinstance(model, FSCM):
        pmfs[dummy] = np.ones(1)
    return _join(model, augmented, pmfs), name
