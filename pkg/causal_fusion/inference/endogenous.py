"""
Endogenous Bayesian network estimated from data frequencies, and the
maximum log-likelihood λ* it attains.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from ..errors import DataError
from ..scm.schemas import PSCM, BiasedDataset, Dataset
from ..scm.tools.canonical import c_components
from ..scm.tools.simulation import fill_deterministic_columns
from .factor import Factor, product

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EndogenousBN:
    """P(V | W_V) for every endogenous V, with the never-observed contexts flagged."""

    cpts: dict[str, Factor]
    unseen: dict[str, np.ndarray]

    def conditional(self, name: str) -> Factor:
        return self.cpts[name]

    def has_unseen(self) -> bool:
        return any(mask.any() for mask in self.unseen.values())


def _flat_index(values: np.ndarray, cards: tuple[int, ...]) -> np.ndarray:
    if not cards:
        return np.zeros(values.shape[0], dtype=np.int64)
    return np.ravel_multi_index(tuple(values.T), cards)


def _family_counts(model: PSCM, data: Dataset, name: str, context: tuple[str, ...]) -> np.ndarray:
    family = (name, *context)
    cards = tuple(model.card(v) for v in family)
    columns = data.values[:, [data.index(v) for v in family]]
    counts = np.zeros(math.prod(cards), dtype=float)
    np.add.at(counts, _flat_index(columns, cards), data.counts)
    return counts.reshape(cards)


def endogenous_bn_from_data(model: PSCM, data: Dataset) -> EndogenousBN:
    """
    Relative-frequency estimate of P(V | W_V) with W_V from the c-components.

    Unseen contexts get a uniform conditional and are flagged.
    """
    if not data.is_complete([v for v in model.endogenous]):
        raise DataError("The endogenous network needs complete records over every endogenous variable")
    decomposition = c_components(model)
    cpts, unseen = {}, {}
    for name in model.endogenous:
        context = decomposition.predecessors(name)
        counts = _family_counts(model, data, name, context)
        totals = counts.sum(axis=0, keepdims=True)
        missing = totals == 0
        card = model.card(name)
        conditional = np.where(missing, 1.0 / card, counts / np.where(missing, 1.0, totals))
        cpts[name] = Factor((name, *context), counts.shape, conditional)
        unseen[name] = missing.reshape(counts.shape[1:])
        if missing.any():
            logger.debug(f"{int(missing.sum())} unseen contexts for {name} given {context}")
    return EndogenousBN(cpts=cpts, unseen=unseen)


def endogenous_joint(bn: EndogenousBN, model: PSCM) -> Factor:
    """Joint P(v) as the product of the endogenous conditionals."""
    joint = product(list(bn.cpts.values()))
    return joint.transpose(model.endogenous)


def _saturated_log_likelihood(data: Dataset) -> float:
    counts = data.aggregate().counts.astype(float)
    total = counts.sum()
    if total == 0:
        return 0.0
    return float(np.sum(xlogy(counts, counts / total)))


def max_log_likelihood(model: PSCM, data: Dataset | BiasedDataset) -> float:
    """
    λ*: the log-likelihood of the data at frequency parameters.

    Complete data follow the c-component factorisation; data with missing
    values (the unselected stratum of biased data) use the saturated
    multinomial over observation patterns.
    """
    if isinstance(data, BiasedDataset):
        data = data.to_dataset(model.selector or "S")
    data = fill_deterministic_columns(model, data)
    if data.total == 0:
        return 0.0
    endogenous_in_data = [v for v in data.columns if v in model.endogenous]
    if data.is_complete() and set(endogenous_in_data) == set(model.endogenous):
        decomposition = c_components(model)
        total = 0.0
        for name in model.endogenous:
            counts = _family_counts(model, data, name, decomposition.predecessors(name))
            totals = counts.sum(axis=0, keepdims=True)
            total += float(np.sum(xlogy(counts, counts / np.where(totals == 0, 1.0, totals))))
        return total
    return _saturated_log_likelihood(data)

