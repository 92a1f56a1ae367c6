"""
Vectorised forward simulation through structural equations.
"""

import logging
from typing import Mapping, Optional

import numpy as np

from ...errors import ModelError
from ..schemas import FSCM, MISSING, PSCM, Dataset

logger = logging.getLogger(__name__)


def propagate(
    model: PSCM,
    exogenous: Mapping[str, np.ndarray],
    interventions: Optional[Mapping[str, int]] = None,
) -> dict[str, np.ndarray]:
    """
    Push batches of exogenous states through the model.

    Args:
        model: The PSCM
        exogenous: One integer array per exogenous variable, all of equal length
        interventions: Endogenous variables clamped to a state (surgery)

    Returns:
        Every variable's state array, exogenous ones included
    """
    interventions = interventions or {}
    values = {name: np.asarray(states, dtype=np.int64) for name, states in exogenous.items()}
    missing = [u for u in model.exogenous if u not in values]
    if missing:
        raise ModelError(f"No states given for exogenous variables {missing}")
    size = len(next(iter(values.values()))) if values else 1
    for name in model.endogenous_order:
        if name in interventions:
            values[name] = np.full(size, interventions[name], dtype=np.int64)
            continue
        parents = model.parents(name)
        table = model.se_array(name)
        values[name] = table[tuple(values[p] for p in parents)] if parents else np.full(size, table.item())
    return values


def sample_exogenous(fscm: FSCM, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    if fscm.pscm.chance_parents:
        raise ModelError("Sampling models with study-specific chances requires a regime; restrict the model first")
    return {u: rng.choice(fscm.pscm.card(u), size=n, p=fscm.theta(u)) for u in fscm.pscm.exogenous}


def sample_endogenous(
    fscm: FSCM,
    n: int,
    rng: np.random.Generator,
    interventions: Optional[Mapping[str, int]] = None,
) -> Dataset:
    """Draw n endogenous records from an FSCM, optionally under do(interventions)."""
    states = propagate(fscm.pscm, sample_exogenous(fscm, n, rng), interventions)
    columns = fscm.pscm.endogenous
    data = Dataset(columns, np.column_stack([states[c] for c in columns]), np.ones(n, dtype=np.int64))
    logger.debug(f"Sampled {n} records under interventions {dict(interventions or {})}")
    return data.aggregate()


def enumerate_exogenous(model: PSCM) -> dict[str, np.ndarray]:
    """Every joint exogenous configuration, row-major in declaration order."""
    cards = [model.card(u) for u in model.exogenous]
    grid = np.indices(cards).reshape(len(cards), -1)
    return {u: grid[i] for i, u in enumerate(model.exogenous)}


def fill_deterministic_columns(model: PSCM, data: Dataset) -> Dataset:
    """
    Add columns for endogenous variables that are functions of observed
    columns only (every exogenous parent has a single state), such as the
    coarsening index W' := i(W). Rows with a missing parent stay MISSING.
    """
    added = True
    while added:
        added = False
        for name in model.endogenous_order:
            if data.has_column(name):
                continue
            parents = model.parents(name)
            if any(model.card(p) != 1 for p in model.exogenous_parents(name)):
                continue
            endo_parents = model.endogenous_parents(name)
            if not all(data.has_column(p) for p in endo_parents):
                continue
            columns = {p: data.column(p) for p in endo_parents}
            observed = np.all([columns[p] != MISSING for p in endo_parents], axis=0) if endo_parents else np.ones(len(data), bool)
            index = tuple(
                np.where(observed, columns[p], 0) if p in columns else np.zeros(len(data), dtype=np.int64)
                for p in parents
            )
            values = np.where(observed, model.se_array(name)[index], MISSING)
            data = data.with_column(name, values)
            added = True
    return data
