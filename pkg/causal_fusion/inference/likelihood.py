"""
Record likelihoods and exogenous posteriors under an FSCM.

Every quantity is computed by variable elimination on the factors of the
FSCM joint: one PMF factor per exogenous variable and one degenerate CPT
per structural equation.
"""

from __future__ import annotations

import logging
import math
from typing import Final, Mapping, Union

import numpy as np
from pydantic import BaseModel, Field, computed_field

from ..errors import DataError
from ..scm.schemas import FSCM, MISSING, PSCM, BiasedDataset, Dataset
from ..scm.tools.simulation import fill_deterministic_columns
from .elimination import EliminationPlan, plan_elimination, variable_elimination
from .endogenous import max_log_likelihood
from .factor import Factor, se_to_cpt

logger = logging.getLogger(__name__)


class _ZeroEvidence:
    """Returned instead of a posterior when the evidence has probability zero."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __bool__(self) -> bool:
        return False

    def __repr__(self) -> str:
        return "ZERO_EVIDENCE"

    def __reduce__(self):
        return (_ZeroEvidence, ())


ZERO_EVIDENCE: Final = _ZeroEvidence()

Posterior = Union[dict[str, np.ndarray], _ZeroEvidence]


# ============================================================================
# Factors of an FSCM
# ============================================================================


def structural_factors(model: PSCM) -> list[Factor]:
    """Degenerate CPTs of every structural equation (θ-independent)."""
    return [se_to_cpt(model.equation(name), model) for name in model.endogenous]


def exogenous_factors(fscm: FSCM) -> list[Factor]:
    model = fscm.pscm
    factors = []
    for name in model.exogenous:
        theta = fscm.theta(name)
        parent = model.chance_parents.get(name)
        if parent is None:
            factors.append(Factor((name,), (model.card(name),), theta))
        else:
            factors.append(Factor((name, parent), (model.card(name), model.card(parent)), theta.T))
    return factors


def fscm_factors(fscm: FSCM) -> list[Factor]:
    return exogenous_factors(fscm) + structural_factors(fscm.pscm)


def record_evidence(columns: tuple[str, ...], row: np.ndarray) -> dict[str, int]:
    return {column: int(value) for column, value in zip(columns, row) if value != MISSING}


def _check_columns(model: PSCM, data: Dataset) -> None:
    unknown = [c for c in data.columns if not model.has_variable(c)]
    if unknown:
        raise DataError(f"Columns {unknown} are not model variables")


# ============================================================================
# Likelihoods
# ============================================================================


def record_probabilities(fscm: FSCM, data: Dataset) -> np.ndarray:
    """P(record) for every distinct record, missing values marginalised."""
    model = fscm.pscm
    _check_columns(model, data)
    factors = fscm_factors(fscm)
    plans: dict[tuple[str, ...], EliminationPlan] = {}
    probabilities = np.empty(len(data))
    for i, row in enumerate(data.values):
        evidence = record_evidence(data.columns, row)
        key = tuple(sorted(evidence))
        if key not in plans:
            plans[key] = plan_elimination(factors, (), key)
        probabilities[i] = variable_elimination(factors, (), evidence, plans[key]).total()
    return probabilities


def log_likelihood(fscm: FSCM, data: Dataset) -> float:
    """
    Σ_records n · log P(record); -inf as soon as a record with a positive
    count has probability zero.
    """
    if data.total == 0:
        return 0.0
    probabilities = record_probabilities(fscm, data)
    positive = data.counts > 0
    if np.any(probabilities[positive] <= 0):
        return -math.inf
    return float(np.sum(data.counts[positive] * np.log(probabilities[positive])))


def log_likelihood_biased(fscm: FSCM, data: BiasedDataset) -> float:
    """N_{S=0} · log P(S=0) + Σ_{D_{S=1}} log P(v, S=1) on a selector-embedded model."""
    selector = fscm.pscm.selector
    if selector is None:
        raise DataError("Biased likelihoods need a model with an embedded selector")
    return log_likelihood(fscm, data.to_dataset(selector))


def posterior_exogenous(fscm: FSCM, record: Mapping[str, int]) -> Posterior:
    """P(U | record) for every exogenous U, or ZERO_EVIDENCE."""
    factors = fscm_factors(fscm)
    evidence = {name: int(state) for name, state in record.items() if state != MISSING}
    posteriors = {}
    for name in fscm.pscm.exogenous:
        joint = variable_elimination(factors, (name,), evidence)
        total = joint.total()
        if total <= 0:
            return ZERO_EVIDENCE
        posteriors[name] = joint.values / total
    return posteriors


# ============================================================================
# Reports
# ============================================================================


class LikelihoodReport(BaseModel):
    ll: float = Field(..., description="Log-likelihood of the data under the FSCM")
    ll_star: float = Field(..., description="Global maximum λ*")

    @computed_field
    @property
    def gap(self) -> float:
        return self.ll_star - self.ll


def likelihood_report(fscm: FSCM, data: Union[Dataset, BiasedDataset]) -> LikelihoodReport:
    if isinstance(data, BiasedDataset):
        ll = log_likelihood_biased(fscm, data)
    else:
        ll = log_likelihood(fscm, fill_deterministic_columns(fscm.pscm, data))
    return LikelihoodReport(ll=ll, ll_star=max_log_likelihood(fscm.pscm, data))
