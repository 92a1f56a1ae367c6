"""
Selection bias: partitioning records with a selector, embedding the
selector in a model (M^S), and reducing a biased model to a single
observed variable T := h(V).
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from ..config import WORST_BIAS_MULTIPLIER
from ..errors import BudgetExceededError, DataError, ModelError
from ..scm.schemas import FSCM, PSCM, BiasedDataset, Dataset, StructuralEquation, Variable
from ..scm.tools.simulation import enumerate_exogenous, propagate
from .schemas import Selector

logger = logging.getLogger(__name__)

SELECTOR_VAR = "S"
# Joint exogenous configurations enumerated by reduce_selection
REDUCTION_LIMIT = 1 << 22


def partition_by_selector(data: Dataset, sel: Selector) -> BiasedDataset:
    """Keep the records with g=1; collapse the others into N_{S=0}."""
    mask = sel.mask(data)
    selected = data.select(mask)
    n_unselected = int(data.counts[~mask].sum())
    logger.debug(f"Selector kept {selected.total} records, {n_unselected} unselected")
    return BiasedDataset(selected=selected, n_unselected=n_unselected)


def unselected_count(
    n_selected: int,
    *,
    n_s0: Optional[int] = None,
    p_s0: Optional[float] = None,
    assume_worst: bool = False,
) -> int:
    """
    N_{S=0} from exactly one of: an explicit count, the probability P(S=0),
    or the worst-case limit P(S=0) -> 1.
    """
    given = sum(x is not None and x is not False for x in (n_s0, p_s0, assume_worst or None))
    if given != 1:
        raise DataError("Exactly one of n_s0, p_s0 or the worst-bias limit must be given")
    if n_s0 is not None:
        if n_s0 < 0:
            raise DataError("N_{S=0} must be non-negative")
        return int(n_s0)
    if assume_worst:
        return WORST_BIAS_MULTIPLIER * n_selected
    if not 0.0 <= p_s0 < 1.0:
        raise DataError(f"P(S=0) must lie in [0, 1), got {p_s0}")
    return int(round(n_selected * p_s0 / (1.0 - p_s0)))


def embed_selector(model: PSCM, sel: Selector, name: str = SELECTOR_VAR) -> PSCM:
    """
    M^S: a Boolean endogenous S with parents sel.scope and SE g, plus a
    one-state exogenous parent.
    """
    for variable in sel.scope:
        if not model.has_variable(variable) or model.variable(variable).kind != "endogenous":
            raise ModelError(f"Selector scope variable {variable!r} is not endogenous in the model")
        if model.card(variable) != sel.cards[sel.scope.index(variable)]:
            raise ModelError(f"Selector cardinality of {variable!r} differs from the model's")
    dummy = f"U_{name}"
    for taken in (name, dummy):
        if model.has_variable(taken):
            raise ModelError(f"Variable name {taken!r} already used by the model")
    variables = (
        *model.variables,
        Variable(name=name, cardinality=2, kind="endogenous"),
        Variable(name=dummy, cardinality=1, kind="exogenous"),
    )
    equation = StructuralEquation(child=name, parent_order=(*sel.scope, dummy), table=sel.table)
    arcs = (*model.arcs, *((v, name) for v in sel.scope), (dummy, name))
    return model.replace(variables=variables, arcs=arcs, equations=(*model.equations, equation), selector=name)


def selected_configurations(model: PSCM) -> tuple[tuple[str, ...], np.ndarray]:
    """
    Base endogenous variables of M^S and the row-major indices of their
    joint states with S=1.
    """
    if model.selector is None:
        raise ModelError("Model has no embedded selector")
    name = model.selector
    endogenous = tuple(v for v in model.endogenous if v != name)
    cards = [model.card(v) for v in endogenous]
    grid = dict(zip(endogenous, np.indices(cards).reshape(len(cards), -1)))
    equation = model.equation(name)
    index = tuple(grid[p] if p in grid else np.zeros(grid[endogenous[0]].shape, dtype=np.int64) for p in equation.parent_order)
    if any(model.card(p) != 1 for p in model.exogenous_parents(name)):
        raise ModelError("The selector must depend on endogenous variables only")
    flags = model.se_array(name)[index]
    return endogenous, np.flatnonzero(flags == 1)


def reduce_selection(fscm: FSCM, biased: BiasedDataset) -> tuple[FSCM, Dataset]:
    """
    Collapse the endogenous variables of a biased model into one observed
    variable T: T enumerates the selected joint states, plus a last state
    "*" standing for every unselected one.

    The reduced model has the same exogenous variables and PMFs; its
    likelihood on the reduced data equals the biased likelihood of the
    original pair.
    """
    model = fscm.pscm
    if model.chance_parents:
        raise ModelError("Selection reduction does not support study-specific chances")
    if model.exogenous_space_size() > REDUCTION_LIMIT:
        raise BudgetExceededError(f"Joint exogenous space of {model.exogenous_space_size()} states is too large to reduce")
    endogenous, selected = selected_configurations(model)
    cards = [model.card(v) for v in endogenous]
    position = {int(flat): k for k, flat in enumerate(selected)}
    unselected_state = len(selected)

    states = propagate(model, enumerate_exogenous(model))
    flat = np.ravel_multi_index([states[v] for v in endogenous], cards)
    chosen = states[model.selector] == 1
    table = np.where(chosen, np.array([position.get(int(f), unselected_state) for f in flat]), unselected_state)

    names = tuple(
        ",".join(model.variable(v).state_name(int(s)) for v, s in zip(endogenous, np.unravel_index(f, cards)))
        for f in selected
    )
    reduced = PSCM(
        variables=(
            *(model.variable(u) for u in model.exogenous),
            Variable(name="T", cardinality=len(selected) + 1, kind="endogenous", states=(*names, "*")),
        ),
        arcs=tuple((u, "T") for u in model.exogenous),
        equations=(StructuralEquation(child="T", parent_order=model.exogenous, table=tuple(int(t) for t in table)),),
    )

    data = biased.selected.reorder(endogenous)
    record_flat = np.ravel_multi_index(data.values.T, cards) if len(data) else np.zeros(0, dtype=np.int64)
    if any(int(f) not in position for f in record_flat):
        raise DataError("Selected records must satisfy the selector")
    t_values = [position[int(f)] for f in record_flat]
    counts = list(data.counts)
    if biased.n_unselected:
        t_values.append(unselected_state)
        counts.append(biased.n_unselected)
    reduced_data = Dataset.from_records(("T",), [(t,) for t in t_values], counts)
    return FSCM(pscm=reduced, exo_pmfs={u: fscm.theta(u) for u in model.exogenous}), reduced_data


def incremental_removal_selectors(
    model: PSCM,
    data: Dataset,
    scope: Optional[Sequence[str]] = None,
) -> list[Selector]:
    """
    Selectors deselecting the observed strata one at a time, largest count
    first (ties by state order), until a single stratum is left. Each
    selector refines the previous one; the first one selects everything.
    """
    scope = tuple(scope) if scope is not None else tuple(v for v in model.endogenous if data.has_column(v))
    strata = data.project(list(scope))
    cards = [model.card(v) for v in scope]
    flat = np.ravel_multi_index(strata.values.T, cards)
    order = sorted(range(len(strata)), key=lambda k: (-int(strata.counts[k]), int(flat[k])))
    table = np.ones(int(np.prod(cards)), dtype=np.int64)
    selectors = [Selector.from_table(model, scope, table)]
    for k in order[:-1]:
        table[flat[k]] = 0
        selectors.append(Selector.from_table(model, scope, table))
    return selectors
