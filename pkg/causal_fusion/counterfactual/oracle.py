"""
Brute-force bounds on a query over every exogenous distribution compatible
with the data, for models small enough to enumerate.

With a single exogenous variable the compatible set is a polytope and the
bounds are exact linear programs (Charnes-Cooper for conditional queries).
With several exogenous variables the joint distribution is a product of
PMFs, and the bounds are searched by multi-start SLSQP from random points
of the simplices; the result is then only as good as the search.
"""

from __future__ import annotations

import logging
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import linprog, minimize

from ..config import DEFAULT_ORACLE_BUDGET
from ..errors import BudgetExceededError, DataError, IncompatibilityError, ModelError
from ..fusion.merging import regime_structure
from ..inference.endogenous import endogenous_bn_from_data, endogenous_joint
from ..scm.schemas import PSCM, BiasedDataset, Dataset
from ..scm.tools.simulation import enumerate_exogenous, fill_deterministic_columns, propagate
from .schemas import QuerySpec

logger = logging.getLogger(__name__)

OracleMethod = Literal["linprog", "slsqp"]

RESIDUAL_TOLERANCE = 1e-4
INNER_SLACK = 0.01


class OracleBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    lower: float
    upper: float
    method: OracleMethod
    feasible_starts: int = Field(0, ge=0, description="Local searches ending within the residual tolerance")
    certified_inner: Optional[bool] = Field(
        None, description="Whether the given EM range lies inside the bounds (with 0.01 slack)"
    )


def _compatibility_system(model: PSCM, data: Union[Dataset, BiasedDataset], outcomes: dict) -> tuple[np.ndarray, np.ndarray]:
    """
    Rows A and targets b such that A·p = b states compatibility of the joint
    exogenous distribution p (one column per joint configuration).
    """
    endogenous = [v for v in model.endogenous if v != model.selector]
    cards = [model.card(v) for v in endogenous]
    flat = np.ravel_multi_index([outcomes[v] for v in endogenous], cards)
    size = int(np.prod(cards))

    if isinstance(data, BiasedDataset):
        if model.selector is None:
            raise ModelError("Biased data need a model with an embedded selector")
        selected = outcomes[model.selector] == 1
        records = data.selected.reorder(endogenous)
        frequencies = np.zeros(size + 1)
        record_flat = np.ravel_multi_index(records.values.T, cards) if len(records) else np.zeros(0, dtype=np.int64)
        np.add.at(frequencies, record_flat, records.counts)
        frequencies[size] = data.n_unselected
        frequencies /= data.total
        cells = np.where(selected, flat, size)
        rows = np.zeros((size + 1, len(flat)))
        rows[cells, np.arange(len(flat))] = 1.0
        return rows, frequencies

    data = fill_deterministic_columns(model, data)
    joint = endogenous_joint(endogenous_bn_from_data(model, data), model).transpose(endogenous)
    rows = np.zeros((size, len(flat)))
    rows[flat, np.arange(len(flat))] = 1.0
    return rows, joint.values.reshape(-1)


def _query_vectors(model: PSCM, q: QuerySpec, grid: dict) -> tuple[np.ndarray, np.ndarray]:
    """Per joint configuration: [target and evidence hold], [evidence holds]."""
    structure = regime_structure(model)
    lowered = q.lower(structure)
    worlds = [propagate(structure, grid)]
    worlds += [propagate(structure, grid, interventions) for interventions in lowered.worlds]
    size = len(next(iter(grid.values())))
    evidence = np.ones(size, dtype=bool)
    for variable, state, world in lowered.evidence:
        evidence &= worlds[world][variable] == state
    target = evidence.copy()
    for variable, state, world in lowered.target:
        target &= worlds[world][variable] == state
    return target.astype(float), evidence.astype(float)


def brute_force_bounds(
    model: PSCM,
    data: Union[Dataset, BiasedDataset],
    q: QuerySpec,
    budget: int = DEFAULT_ORACLE_BUDGET,
    n_starts: int = 50,
    seed: int = 0,
    em_range: Optional[tuple[float, float]] = None,
) -> OracleBounds:
    """
    Lower and upper values of `q` over the exogenous distributions whose
    endogenous distribution matches the data within 1e-4.

    Raises:
        BudgetExceededError: if the joint exogenous space exceeds `budget`
        IncompatibilityError: if no compatible distribution is found
    """
    if model.regime is not None or model.chance_parents:
        raise ModelError("The oracle works on base models (optionally with a selector) only")
    size = model.exogenous_space_size()
    if size > budget:
        raise BudgetExceededError(f"Joint exogenous space of {size} states exceeds the budget of {budget}")
    grid = enumerate_exogenous(model)
    outcomes = propagate(model, grid)
    rows, targets = _compatibility_system(model, data, outcomes)
    numerator, denominator = _query_vectors(model, q, grid)
    if not np.any(denominator):
        raise DataError("The query evidence is impossible under every exogenous configuration")

    free = [u for u in model.exogenous if model.card(u) > 1]
    if len(free) <= 1:
        lower, upper = _linear_bounds(rows, targets, numerator, denominator)
        method, starts = "linprog", 0
    else:
        lower, upper, starts = _search_bounds(model, grid, rows, targets, numerator, denominator, n_starts, seed)
        method = "slsqp"

    certified = None
    if em_range is not None:
        certified = bool(em_range[0] >= lower - INNER_SLACK and em_range[1] <= upper + INNER_SLACK)
    logger.info(f"Oracle bounds [{lower:.4f}, {upper:.4f}] by {method}")
    return OracleBounds(lower=lower, upper=upper, method=method, feasible_starts=starts, certified_inner=certified)


def _linear_bounds(rows, targets, numerator, denominator) -> tuple[float, float]:
    """
    Charnes-Cooper: with y = t·p and t = 1 / (denominator·p), the ratio
    becomes linear under denominator·y = 1, rows·y = t·targets, sum(y) = t.
    """
    n = rows.shape[1]
    a_eq = np.zeros((rows.shape[0] + 2, n + 1))
    a_eq[: rows.shape[0], :n] = rows
    a_eq[: rows.shape[0], n] = -targets
    a_eq[-2, :n] = denominator
    a_eq[-1, :n] = 1.0
    a_eq[-1, n] = -1.0
    b_eq = np.zeros(rows.shape[0] + 2)
    b_eq[-2] = 1.0
    cost = np.append(numerator, 0.0)
    values = []
    for sign in (1.0, -1.0):
        result = linprog(sign * cost, A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * (n + 1), method="highs")
        if result.status != 0:
            raise IncompatibilityError(f"No exogenous distribution reproduces the data: {result.message}")
        values.append(sign * result.fun)
    return float(np.clip(values[0], 0.0, 1.0)), float(np.clip(values[1], 0.0, 1.0))


def _search_bounds(model, grid, rows, targets, numerator, denominator, n_starts, seed) -> tuple[float, float, int]:
    exogenous = list(model.exogenous)
    cards = [model.card(u) for u in exogenous]
    offsets = np.cumsum([0] + cards)

    def joint(x: np.ndarray) -> np.ndarray:
        p = np.ones(len(grid[exogenous[0]]))
        for i, u in enumerate(exogenous):
            p = p * x[offsets[i] : offsets[i + 1]][grid[u]]
        return p

    def value(x: np.ndarray) -> float:
        p = joint(x)
        return float(numerator @ p / max(denominator @ p, 1e-12))

    constraints = [
        {"type": "eq", "fun": lambda x: rows @ joint(x) - targets},
        {"type": "eq", "fun": lambda x: np.array([x[offsets[i] : offsets[i + 1]].sum() - 1.0 for i in range(len(cards))])},
    ]
    bounds = [(0.0, 1.0)] * int(offsets[-1])
    rng = np.random.default_rng(seed)
    lower, upper, feasible = np.inf, -np.inf, 0
    for start in range(n_starts):
        x0 = np.concatenate([rng.dirichlet(np.ones(c)) for c in cards])
        for sign in (1.0, -1.0):
            result = minimize(
                lambda x: sign * value(x),
                x0,
                method="SLSQP",
                bounds=bounds,
                constraints=constraints,
                options={"maxiter": 500, "ftol": 1e-10},
            )
            residual = np.max(np.abs(rows @ joint(result.x) - targets))
            if residual > RESIDUAL_TOLERANCE:
                continue
            feasible += 1
            found = value(result.x)
            lower, upper = min(lower, found), max(upper, found)
    if feasible == 0:
        raise IncompatibilityError(f"None of {2 * n_starts} local searches reached a compatible distribution")
    logger.debug(f"{feasible} of {2 * n_starts} local searches ended compatible")
    return float(np.clip(lower, 0.0, 1.0)), float(np.clip(upper, 0.0, 1.0)), feasible
