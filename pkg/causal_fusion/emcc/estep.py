"""
Compiled E- and M-steps.

A dataset is compiled once against a model; afterwards each E-step only
multiplies exogenous PMFs into precomputed indicator tensors.

Complete records factorise over c-components: for every component, the
indicator I_V[r, u_E] = [f_V(w_r, u_E) = v_r] of each of its variables is
stacked over records, and P(U | v) comes out of one batched einsum.
Records with missing values (the unselected stratum) are handled on the
joint exogenous space: I[r, u] = [u reproduces the observed part of r].
When the joint space is too large for that, they fall back to variable
elimination.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..inference.elimination import variable_elimination
from ..inference.factor import Factor
from ..inference.likelihood import record_evidence, structural_factors
from ..scm.schemas import MISSING, PSCM, Dataset
from ..scm.tools.canonical import c_components
from ..scm.tools.simulation import enumerate_exogenous, fill_deterministic_columns, propagate

logger = logging.getLogger(__name__)

# Joint exogenous configurations enumerated for records with missing values
JOINT_ENUMERATION_LIMIT = 1 << 20

Theta = dict[str, np.ndarray]


@dataclass(frozen=True)
class EStepResult:
    expected: Theta
    log_likelihood: float
    skipped: int


@dataclass(frozen=True)
class _Batch:
    """Records sharing one einsum layout: a c-component, or the joint exogenous space."""

    exogenous: tuple[str, ...]
    indicators: tuple[tuple[np.ndarray, list[int]], ...]
    labels: dict[str, int]
    contexts: dict[str, np.ndarray]
    paths: dict[str, list]


class CompiledData:
    """A dataset bound to a model, ready for repeated EM steps."""

    def __init__(self, model: PSCM, data: Dataset):
        data = fill_deterministic_columns(model, data)
        unknown = [c for c in data.columns if not model.has_variable(c)]
        if unknown:
            raise DataError(f"Columns {unknown} are not model variables")
        if any(model.variable(c).kind == "exogenous" for c in data.columns):
            raise DataError("Exogenous variables cannot be observed")

        self.model = model
        self.data = data
        self.n_records = data.total
        self._contexts = {u: model.chance_contexts(u) for u in model.exogenous}

        if all(data.has_column(v) for v in model.endogenous):
            columns = [data.index(v) for v in model.endogenous]
            complete = np.all(data.values[:, columns] != MISSING, axis=1)
        else:
            complete = np.zeros(len(data), dtype=bool)
        self._complete = data.select(complete)
        self._incomplete = data.select(~complete)

        self._components = self._compile_components() if len(self._complete) else []
        self._joint = None
        self._fallback_rows: list[dict[str, int]] = []
        if len(self._incomplete):
            if model.exogenous_space_size() <= JOINT_ENUMERATION_LIMIT:
                self._joint = self._compile_joint()
            else:
                self._compile_fallback()
        logger.debug(
            f"Compiled {len(self._complete)} complete and {len(self._incomplete)} incomplete distinct records"
        )

    # ------------------------------------------------------------------
    # Compilation
    # ------------------------------------------------------------------

    def _record_contexts(self, data: Dataset, exogenous: tuple[str, ...]) -> dict[str, np.ndarray]:
        contexts = {}
        for u in exogenous:
            parent = self.model.chance_parents.get(u)
            if parent is None:
                contexts[u] = np.zeros(len(data), dtype=np.int64)
                continue
            if not data.has_column(parent) or np.any(data.column(parent) == MISSING):
                raise DataError(f"Chance index {parent} of {u} must be observed in every record")
            contexts[u] = data.column(parent).copy()
        return contexts

    def _compile_components(self) -> list[_Batch]:
        model, data = self.model, self._complete
        batches = []
        for component in c_components(model).components:
            if not component.endogenous:
                continue
            labels = {u: i + 1 for i, u in enumerate(component.exogenous)}
            indicators = []
            for name in component.endogenous:
                parents = model.parents(name)
                endo_axes = [i for i, p in enumerate(parents) if model.variable(p).kind == "endogenous"]
                exo = [p for p in parents if model.variable(p).kind == "exogenous"]
                table = np.moveaxis(model.se_array(name), endo_axes, list(range(len(endo_axes))))
                if endo_axes:
                    selected = table[tuple(data.column(parents[i]) for i in endo_axes)]
                else:
                    selected = np.broadcast_to(table, (len(data), *table.shape))
                observed = data.column(name).reshape((-1,) + (1,) * len(exo))
                indicators.append(((selected == observed).astype(float), [0] + [labels[u] for u in exo]))
            contexts = self._record_contexts(data, component.exogenous)
            batches.append(self._batch(component.exogenous, indicators, labels, contexts, len(data)))
        return batches

    def _compile_joint(self) -> _Batch:
        model, data = self.model, self._incomplete
        grid = enumerate_exogenous(model)
        states = propagate(model, grid)
        cards = [model.card(u) for u in model.exogenous]
        consistent = np.ones((len(data), math.prod(cards)), dtype=bool)
        for j, column in enumerate(data.columns):
            values = data.values[:, j]
            observed = values != MISSING
            consistent[observed] &= states[column][None, :] == values[observed][:, None]
        labels = {u: i + 1 for i, u in enumerate(model.exogenous)}
        indicator = consistent.astype(float).reshape(len(data), *cards)
        contexts = self._record_contexts(data, model.exogenous)
        return self._batch(model.exogenous, [(indicator, [0] + list(labels.values()))], labels, contexts, len(data))

    def _batch(self, exogenous, indicators, labels, contexts, n_rows) -> _Batch:
        paths = {}
        for u in exogenous:
            operands = self._operands(indicators, labels, {v: np.ones((n_rows, self.model.card(v))) for v in exogenous})
            paths[u] = np.einsum_path(*operands, [0, labels[u]], optimize="greedy")[0]
        return _Batch(tuple(exogenous), tuple(indicators), labels, contexts, paths)

    def _compile_fallback(self) -> None:
        self._structural = structural_factors(self.model)
        self._fallback_rows = [record_evidence(self._incomplete.columns, row) for row in self._incomplete.values]
        logger.warning(
            f"Joint exogenous space of {self.model.exogenous_space_size()} states is too large to enumerate; "
            f"{len(self._fallback_rows)} incomplete records use variable elimination"
        )

    @staticmethod
    def _operands(indicators, labels, gathered: Theta) -> list:
        operands = []
        for array, sub in indicators:
            operands += [array, sub]
        for u, rows in gathered.items():
            operands += [rows, [0, labels[u]]]
        return operands

    # ------------------------------------------------------------------
    # Steps
    # ------------------------------------------------------------------

    def _as_table(self, name: str, pmf: np.ndarray) -> np.ndarray:
        return np.asarray(pmf, dtype=float).reshape(self._contexts[name], self.model.card(name))

    def e_step(self, theta: Theta) -> EStepResult:
        tables = {u: self._as_table(u, theta[u]) for u in self.model.exogenous}
        expected = {u: np.zeros_like(tables[u]) for u in self.model.exogenous}
        log_likelihood = 0.0
        skipped = 0

        if self._components:
            counts = self._complete.counts.astype(float)
            marginals, probabilities = [], []
            for batch in self._components:
                margs = self._marginals(batch, tables)
                marginals.append(margs)
                probabilities.append(next(iter(margs.values())).sum(axis=1))
            stacked = np.vstack(probabilities)
            zero = np.any(stacked <= 0, axis=0)
            weights = np.where(zero, 0.0, counts)
            for batch, margs, prob in zip(self._components, marginals, probabilities):
                safe = np.where(prob > 0, prob, 1.0)[:, None]
                for u, marginal in margs.items():
                    np.add.at(expected[u], batch.contexts[u], weights[:, None] * marginal / safe)
            log_likelihood += float(np.sum(weights * np.log(np.where(zero, 1.0, stacked)).sum(axis=0)))
            skipped += int(self._complete.counts[zero].sum())

        if self._joint is not None:
            counts = self._incomplete.counts.astype(float)
            margs = self._marginals(self._joint, tables)
            prob = next(iter(margs.values())).sum(axis=1)
            zero = prob <= 0
            weights = np.where(zero, 0.0, counts)
            safe = np.where(zero, 1.0, prob)[:, None]
            for u, marginal in margs.items():
                np.add.at(expected[u], self._joint.contexts[u], weights[:, None] * marginal / safe)
            log_likelihood += float(np.sum(weights * np.log(safe[:, 0])))
            skipped += int(self._incomplete.counts[zero].sum())
        elif self._fallback_rows:
            ll, lost = self._fallback_step(tables, expected)
            log_likelihood += ll
            skipped += lost

        return EStepResult(expected=expected, log_likelihood=log_likelihood, skipped=skipped)

    def _marginals(self, batch: _Batch, tables: Theta) -> Theta:
        gathered = {u: tables[u][batch.contexts[u]] for u in batch.exogenous}
        operands = self._operands(batch.indicators, batch.labels, gathered)
        return {
            u: np.einsum(*operands, [0, batch.labels[u]], optimize=batch.paths[u])
            for u in batch.exogenous
        }

    def _fallback_step(self, tables: Theta, expected: Theta) -> tuple[float, int]:
        model = self.model
        factors = list(self._structural)
        for u in model.exogenous:
            parent = model.chance_parents.get(u)
            if parent is None:
                factors.append(Factor((u,), (model.card(u),), tables[u][0]))
            else:
                factors.append(Factor((u, parent), (model.card(u), model.card(parent)), tables[u].T))
        log_likelihood, skipped = 0.0, 0
        for evidence, count in zip(self._fallback_rows, self._incomplete.counts):
            for i, u in enumerate(model.exogenous):
                joint = variable_elimination(factors, (u,), evidence)
                total = joint.total()
                if total <= 0:
                    skipped += int(count)
                    break
                if i == 0:
                    log_likelihood += count * math.log(total)
                parent = model.chance_parents.get(u)
                context = evidence[parent] if parent is not None else 0
                expected[u][context] += count * joint.values / total
        return log_likelihood, skipped

    def m_step(self, theta: Theta, expected: Theta) -> Theta:
        """Normalise expected counts per chance context; empty contexts keep their PMF."""
        updated = {}
        for u in self.model.exogenous:
            previous = self._as_table(u, theta[u])
            totals = expected[u].sum(axis=1, keepdims=True)
            table = np.where(totals > 0, expected[u] / np.where(totals > 0, totals, 1.0), previous)
            updated[u] = table.reshape(np.shape(theta[u]))
        return updated
