"""
Merging heterogeneous studies into one dataset and building the auxiliary
models that learn from it.

Records of all studies are stacked with an extra index column W naming the
interventional regime that produced them (w_empty for observational data).
The auxiliary model M' adds W as a common parent of every endogenous
variable: under W=w the intervened variables are clamped to their
intervened states and the others keep their original equations. When some
studies are biased, a selector S with parents (selector scopes, W) applies
each study's selection function by W. M'' further lets listed exogenous
variables hold one PMF per group of studies through a coarsening index.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import DataError, ModelError
from ..scm.schemas import FSCM, MISSING, PSCM, BiasedDataset, Dataset, RegimeInfo, StructuralEquation, Variable
from .schemas import MergedDataset, Selector, StudySpec
from .selection import SELECTOR_VAR, embed_selector

logger = logging.getLogger(__name__)

INDEX_VAR = "W"
OBSERVATIONAL_STATE = "w_empty"
CHANCE_INDEX_VAR = "W_study"
SHARED_GROUP = "shared"


# ============================================================================
# Dataset merging
# ============================================================================


def _state_label(model: Optional[PSCM], variables: Sequence[str], state: Sequence[int]) -> str:
    if not variables:
        return OBSERVATIONAL_STATE
    names = [model.variable(v).state_name(s) if model is not None else str(s) for v, s in zip(variables, state)]
    if len(variables) == 1:
        return names[0]
    return ",".join(f"{v}={n}" for v, n in zip(variables, names))


def merge_studies(
    studies: Sequence[StudySpec],
    model: Optional[PSCM] = None,
    index_var: str = INDEX_VAR,
    selector_var: str = SELECTOR_VAR,
) -> MergedDataset:
    """
    Stack the studies' records with a W column (and an S column when any
    study is biased).

    Two studies share a W state only when their intervened assignment,
    their selector and their local-chance declaration coincide. When a
    model is given, W states are named after the intervened state names.
    """
    if not studies:
        raise DataError("At least one study is required")
    endogenous = tuple(model.endogenous) if model is not None else studies[0].dataset.columns
    for study in studies:
        if set(study.dataset.columns) != set(endogenous):
            raise DataError(
                f"Study {study.name} has columns {sorted(study.dataset.columns)}, "
                f"expected the endogenous variables {sorted(endogenous)}"
            )

    keys: list[tuple] = []
    labels: list[str] = []
    interventions: list[dict[str, int]] = []
    origins: list[int] = []
    selectors: list[Optional[Selector]] = []
    for k, study in enumerate(studies):
        selector_key = study.selector.key if study.selector is not None else None
        local = k if study.local_chance_vars else None
        assignments = study.intervened_states if study.is_interventional else ((),)
        for state in assignments:
            key = (study.intervened_vars, tuple(state), selector_key, local)
            if key in keys:
                continue
            keys.append(key)
            labels.append(_state_label(model, study.intervened_vars, state))
            interventions.append(dict(zip(study.intervened_vars, (int(s) for s in state))))
            origins.append(k)
            selectors.append(study.selector)

    # Distinct regimes sharing a display name get the study name appended
    domain = []
    for label, origin in zip(labels, origins):
        domain.append(f"{label}@{studies[origin].name}" if labels.count(label) > 1 else label)
    if len(set(domain)) != len(domain):
        raise DataError(f"Cannot name the regimes of W uniquely: {domain}")

    biased = any(study.is_biased for study in studies)
    columns = (*endogenous, index_var, *((selector_var,) if biased else ()))
    parts = []
    for k, study in enumerate(studies):
        selector_key = study.selector.key if study.selector is not None else None
        local = k if study.local_chance_vars else None
        data = study.dataset.reorder(endogenous)

        def index_of(state: tuple[int, ...]) -> int:
            return keys.index((study.intervened_vars, state, selector_key, local))

        if study.is_interventional:
            w = np.array(
                [index_of(tuple(int(v) for v in row)) for row in data.reorder(study.intervened_vars).values],
                dtype=np.int64,
            )
        else:
            w = np.full(len(data), index_of(()), dtype=np.int64)
        tagged = data.with_column(index_var, w)

        if study.selector is None:
            if biased:
                tagged = tagged.with_column(selector_var, np.ones(len(tagged), dtype=np.int64))
            parts.append(tagged)
            continue

        split = study.biased()
        if study.n_unselected is None:
            mask = study.selector.mask(data)
            selected = tagged.select(mask)
            lost = tagged.select(~mask)
            lost_w, lost_counts = lost.column(index_var), lost.counts
        else:
            selected = tagged
            regimes = np.unique(w)
            if split.n_unselected and len(regimes) != 1:
                raise DataError(
                    f"Study {study.name}: an explicit N_(S=0) cannot be split over {len(regimes)} intervened states"
                )
            lost_w = regimes[:1] if len(regimes) else np.array([index_of(())])
            lost_counts = np.array([split.n_unselected], dtype=np.int64)
        parts.append(selected.with_column(selector_var, np.ones(len(selected), dtype=np.int64)))
        if int(lost_counts.sum()):
            rows = np.full((len(lost_w), len(columns)), MISSING, dtype=np.int64)
            rows[:, columns.index(index_var)] = lost_w
            rows[:, columns.index(selector_var)] = 0
            parts.append(Dataset(columns, rows, lost_counts))

    merged = Dataset.concat(parts, columns=columns)
    expected = sum(study.biased().total if study.is_biased else study.dataset.total for study in studies)
    if merged.total != expected:
        raise DataError(f"Merged dataset holds {merged.total} records, the studies {expected}")
    logger.info(f"Merged {len(studies)} studies into {merged.total} records; {index_var} states: {domain}")
    return MergedDataset(
        dataset=merged,
        endogenous=tuple(endogenous),
        w_domain=tuple(domain),
        w_interventions=tuple(interventions),
        w_study=tuple(origins),
        w_selector=tuple(selectors),
        study_names=tuple(study.name for study in studies),
        index_var=index_var,
        selector_var=selector_var if biased else None,
    )


# ============================================================================
# Auxiliary models
# ============================================================================


def build_auxiliary(model: PSCM, merged: MergedDataset, studies: Optional[Sequence[StudySpec]] = None) -> PSCM:
    """
    M': W becomes the last parent of every endogenous variable, with an
    exogenous U_W copying its states; the SE of V at W=w is the constant
    intervened state when V is intervened in regime w, the original SE
    otherwise.
    """
    if model.selector is not None or model.regime is not None:
        raise ModelError("The base model must not carry a selector or a regime index")
    if set(merged.endogenous) != set(model.endogenous):
        raise ModelError(
            f"Merged records cover {sorted(merged.endogenous)}, the model {sorted(model.endogenous)}"
        )
    index_var = merged.index_var
    index_exo = f"U_{index_var}"
    new_names = [index_var, index_exo]
    if merged.selector_var is not None:
        new_names += [merged.selector_var, f"U_{merged.selector_var}"]
    for name in new_names:
        if model.has_variable(name):
            raise ModelError(f"Variable name {name!r} already used by the model")

    n_w = len(merged.w_domain)
    variables = list(model.variables)
    variables.append(Variable(name=index_var, cardinality=n_w, kind="endogenous", states=merged.w_domain))
    variables.append(Variable(name=index_exo, cardinality=n_w, kind="exogenous", states=merged.w_domain))
    arcs = list(model.arcs) + [(index_exo, index_var)] + [(index_var, v) for v in model.endogenous]
    equations = [StructuralEquation(child=index_var, parent_order=(index_exo,), table=tuple(range(n_w)))]

    for equation in model.equations:
        name = equation.child
        original = model.se_array(name)
        slices = [
            np.full(original.shape, merged.w_interventions[w][name], dtype=np.int64)
            if name in merged.w_interventions[w]
            else original
            for w in range(n_w)
        ]
        table = np.stack(slices, axis=-1)
        equations.append(
            StructuralEquation(child=name, parent_order=(*equation.parent_order, index_var), table=tuple(table.reshape(-1).tolist()))
        )

    if merged.selector_var is not None:
        selector = merged.selector_var
        dummy = f"U_{selector}"
        used = {v for sel in merged.w_selector if sel is not None for v in sel.scope}
        scope = tuple(v for v in model.endogenous if v in used)
        cards = [model.card(v) for v in scope]
        grid = dict(zip(scope, np.indices(cards)))
        slices = [
            sel.evaluate(grid).astype(np.int64) if sel is not None else np.ones(cards, dtype=np.int64)
            for sel in merged.w_selector
        ]
        table = np.stack(slices, axis=-1)[..., None]
        variables.append(Variable(name=selector, cardinality=2, kind="endogenous"))
        variables.append(Variable(name=dummy, cardinality=1, kind="exogenous"))
        arcs += [(v, selector) for v in scope] + [(index_var, selector), (dummy, selector)]
        equations.append(
            StructuralEquation(child=selector, parent_order=(*scope, index_var, dummy), table=tuple(table.reshape(-1).tolist()))
        )

    regime = RegimeInfo(
        base=model,
        index_var=index_var,
        index_exogenous=index_exo,
        w_states=merged.w_domain,
        interventions=merged.w_interventions,
        study_of_state=merged.w_study,
    )
    logger.debug(f"Auxiliary model with {n_w} regimes and selector {merged.selector_var}")
    return PSCM(
        variables=tuple(variables),
        arcs=tuple(arcs),
        equations=tuple(equations),
        selector=merged.selector_var,
        regime=regime,
    )


def attach_local_chances(aux: PSCM, studies: Sequence[StudySpec], name: str = CHANCE_INDEX_VAR) -> PSCM:
    """
    M'': a coarsening index W' := i(W), child of W, becomes the chance parent
    of the exogenous variables some study declares local. Every such study
    forms its own group; the remaining studies share one group.
    """
    regime = aux.regime
    if regime is None:
        raise ModelError("Local chances need an auxiliary model built by build_auxiliary")
    local = [u for study in studies for u in study.local_chance_vars]
    if not local:
        raise ModelError("No study declares local chances")
    for u in local:
        if not aux.has_variable(u) or aux.variable(u).kind != "exogenous":
            raise ModelError(f"Local chance variable {u!r} is not an exogenous variable of the model")
    if max(regime.study_of_state) >= len(studies):
        raise ModelError("The studies do not match the auxiliary model's regimes")

    groups: list[str] = []
    group_of_study: dict[int, int] = {}
    for k, study in enumerate(studies):
        label = study.name if study.local_chance_vars else SHARED_GROUP
        if label not in groups:
            groups.append(label)
        group_of_study[k] = groups.index(label)
    group_of_state = tuple(group_of_study[k] for k in regime.study_of_state)

    dummy = f"U_{name}"
    for taken in (name, dummy):
        if aux.has_variable(taken):
            raise ModelError(f"Variable name {taken!r} already used by the model")
    targets = tuple(dict.fromkeys(local))
    variables = (
        *aux.variables,
        Variable(name=name, cardinality=len(groups), kind="endogenous", states=tuple(groups)),
        Variable(name=dummy, cardinality=1, kind="exogenous"),
    )
    equation = StructuralEquation(child=name, parent_order=(regime.index_var, dummy), table=group_of_state)
    arcs = (*aux.arcs, (regime.index_var, name), (dummy, name), *((name, u) for u in targets))
    logger.info(f"Study-specific chances for {list(targets)} over groups {groups}")
    return aux.replace(
        variables=variables,
        arcs=arcs,
        equations=(*aux.equations, equation),
        chance_parents={**aux.chance_parents, **{u: name for u in targets}},
        regime=regime.model_copy(
            update={"chance_index_var": name, "chance_groups": tuple(groups), "group_of_state": group_of_state}
        ),
    )


# ============================================================================
# Learning problems
# ============================================================================


def learning_problem(model: PSCM, studies: Sequence[StudySpec]) -> tuple[PSCM, Union[Dataset, BiasedDataset]]:
    """
    The model and data EMCC learns from. A single observational study is
    learnt on the model itself (with its selector embedded when biased);
    anything else goes through the merged dataset and M' or M''.
    """
    if not studies:
        raise DataError("At least one study is required")
    if len(studies) == 1 and not studies[0].is_interventional and not studies[0].local_chance_vars:
        study = studies[0]
        if study.is_biased:
            return embed_selector(model, study.selector), study.biased()
        return model, study.dataset
    merged = merge_studies(studies, model)
    aux = build_auxiliary(model, merged, studies)
    if any(study.local_chance_vars for study in studies):
        aux = attach_local_chances(aux, studies)
    return aux, merged.dataset


# ============================================================================
# Back to the base model
# ============================================================================


def regime_structure(model: PSCM, w_state: Optional[str | int] = None) -> PSCM:
    """
    The base model of an auxiliary model, with the structural equations of
    regime `w_state` (intervened variables clamped) when one is given.
    Models without a regime lose their selector, if any.
    """
    regime = model.regime
    if regime is None:
        if model.selector is None:
            return model
        dropped = {model.selector, *model.exogenous_parents(model.selector)}
        return model.replace(
            variables=tuple(v for v in model.variables if v.name not in dropped),
            arcs=tuple(a for a in model.arcs if a[0] not in dropped and a[1] not in dropped),
            equations=tuple(e for e in model.equations if e.child not in dropped),
            selector=None,
        )
    base = regime.base
    if w_state is None:
        return base
    w = _resolve(w_state, regime.w_states, regime.index_var)
    clamped = regime.interventions[w]
    equations = tuple(
        StructuralEquation(
            child=e.child,
            parent_order=e.parent_order,
            table=(clamped[e.child],) * len(e.table),
        )
        if e.child in clamped
        else e
        for e in base.equations
    )
    return base.replace(equations=equations)


def restrict_to_regime(
    fscm: FSCM,
    w_state: Optional[str | int] = None,
    chance_state: Optional[str | int] = None,
) -> FSCM:
    """
    Map an FSCM learnt on M' or M'' back onto the base model: the SEs of the
    chosen regime, and the exogenous PMFs of the chosen chance group
    (by default the group of `w_state`).
    """
    model = fscm.pscm
    base = regime_structure(model, w_state)
    regime = model.regime
    group = None
    if regime is not None and regime.chance_index_var is not None:
        if chance_state is not None:
            group = _resolve(chance_state, regime.chance_groups, regime.chance_index_var)
        elif w_state is not None:
            group = regime.group_of_state[_resolve(w_state, regime.w_states, regime.index_var)]
    pmfs = {}
    for u in base.exogenous:
        theta = fscm.theta(u)
        if u in model.chance_parents:
            if group is None:
                raise ModelError(f"{u} has study-specific chances: give a regime or a chance group")
            theta = theta[group]
        pmfs[u] = theta
    return FSCM(pscm=base, exo_pmfs=pmfs)


def _resolve(state: str | int, domain: Sequence[str], variable: str) -> int:
    if isinstance(state, (int, np.integer)):
        if not 0 <= int(state) < len(domain):
            raise ModelError(f"State {state} out of range for {variable}")
        return int(state)
    if state not in domain:
        raise ModelError(f"Unknown {variable} state {state!r}; expected one of {list(domain)}")
    return list(domain).index(state)
