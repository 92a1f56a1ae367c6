"""
Weighted record containers.

A Dataset is a table of distinct state-index records plus one count per
record. Missing values are stored as MISSING (-1); they appear in the
unselected stratum of selection-biased data, where every endogenous value
is lost and only the selector (and the regime index) is observed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from ...errors import DataError

MISSING = -1
COUNT_COLUMN = "count"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Distinct records (rows of state indices) with integer multiplicities."""

    columns: tuple[str, ...]
    values: np.ndarray
    counts: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.int64).reshape(-1, len(self.columns))
        counts = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        if values.shape[0] != counts.shape[0]:
            raise DataError(f"{values.shape[0]} records but {counts.shape[0]} counts")
        if len(set(self.columns)) != len(self.columns):
            raise DataError(f"Duplicate columns in {self.columns}")
        if np.any(counts < 0):
            raise DataError("Record counts must be non-negative")
        if np.any(values < MISSING):
            raise DataError("State indices must be non-negative (or MISSING)")
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "counts", counts)

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def empty(cls, columns: Sequence[str]) -> "Dataset":
        return cls(tuple(columns), np.zeros((0, len(columns)), dtype=np.int64), np.zeros(0, dtype=np.int64))

    @classmethod
    def from_records(
        cls,
        columns: Sequence[str],
        records: Iterable[Sequence[int]],
        counts: Optional[Iterable[int]] = None,
    ) -> "Dataset":
        rows = [tuple(int(v) for v in record) for record in records]
        if not rows:
            return cls.empty(columns)
        weights = list(counts) if counts is not None else [1] * len(rows)
        return cls(tuple(columns), np.array(rows, dtype=np.int64), np.array(weights, dtype=np.int64)).aggregate()

    @classmethod
    def from_counts(cls, columns: Sequence[str], table: Mapping[tuple[int, ...], int]) -> "Dataset":
        return cls.from_records(columns, list(table.keys()), list(table.values()))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, model=None, count_column: str = COUNT_COLUMN) -> "Dataset":
        """
        Build a dataset from a DataFrame of state names (or indices).

        When `model` is given, cells are resolved against the model's state
        names; empty cells become MISSING. A `count` column, when present,
        holds record multiplicities.
        """
        columns = [c for c in frame.columns if c != count_column]
        counts = frame[count_column].to_numpy(dtype=np.int64) if count_column in frame.columns else np.ones(len(frame), dtype=np.int64)
        values = np.empty((len(frame), len(columns)), dtype=np.int64)
        for j, column in enumerate(columns):
            cells = frame[column].tolist()
            variable = model.variable(column) if model is not None and model.has_variable(column) else None
            if model is not None and variable is None:
                raise DataError(f"Column {column!r} is not a model variable")
            for i, cell in enumerate(cells):
                if cell is None or (isinstance(cell, float) and np.isnan(cell)) or cell == "":
                    values[i, j] = MISSING
                elif variable is not None:
                    try:
                        values[i, j] = variable.state_index(_as_state(cell))
                    except ValueError as e:
                        raise DataError(f"Row {i}, column {column}: {e}") from e
                else:
                    values[i, j] = int(cell)
        return cls(tuple(columns), values, counts).aggregate()

    # ------------------------------------------------------------------
    # Views
    # ------------------------------------------------------------------

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __len__(self) -> int:
        return self.values.shape[0]

    def index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise DataError(f"Dataset has no column {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def has_column(self, name: str) -> bool:
        return name in self.columns

    def is_complete(self, columns: Optional[Sequence[str]] = None) -> bool:
        indices = [self.index(c) for c in columns] if columns is not None else slice(None)
        return not np.any(self.values[:, indices] == MISSING)

    def to_frame(self, model=None) -> pd.DataFrame:
        """DataFrame with state names when `model` is given, plus a count column."""
        data = {}
        for j, column in enumerate(self.columns):
            cells = self.values[:, j]
            if model is not None and model.has_variable(column):
                names = model.variable(column).state_names
                data[column] = [names[v] if v != MISSING else "" for v in cells]
            else:
                data[column] = [int(v) if v != MISSING else "" for v in cells]
        data[COUNT_COLUMN] = self.counts.tolist()
        return pd.DataFrame(data, columns=[*self.columns, COUNT_COLUMN])

    # ------------------------------------------------------------------
    # Transformations
    # ------------------------------------------------------------------

    def aggregate(self) -> "Dataset":
        """Merge duplicate records, drop zero counts, sort lexicographically."""
        keep = self.counts > 0
        values, counts = self.values[keep], self.counts[keep]
        if values.shape[0] == 0:
            return Dataset.empty(self.columns)
        unique, inverse = np.unique(values, axis=0, return_inverse=True)
        merged = np.zeros(unique.shape[0], dtype=np.int64)
        np.add.at(merged, inverse.reshape(-1), counts)
        return Dataset(self.columns, unique, merged)

    def project(self, columns: Sequence[str]) -> "Dataset":
        indices = [self.index(c) for c in columns]
        return Dataset(tuple(columns), self.values[:, indices], self.counts).aggregate()

    def select(self, mask: np.ndarray) -> "Dataset":
        return Dataset(self.columns, self.values[mask], self.counts[mask])

    def with_column(self, name: str, values: np.ndarray) -> "Dataset":
        if name in self.columns:
            raise DataError(f"Column {name!r} already present")
        column = np.asarray(values, dtype=np.int64).reshape(-1, 1)
        return Dataset((*self.columns, name), np.hstack([self.values, column]), self.counts)

    def reorder(self, columns: Sequence[str]) -> "Dataset":
        indices = [self.index(c) for c in columns]
        return Dataset(tuple(columns), self.values[:, indices], self.counts)

    @staticmethod
    def concat(datasets: Sequence["Dataset"], columns: Optional[Sequence[str]] = None) -> "Dataset":
        """Stack datasets; columns absent from a part are filled with MISSING."""
        if columns is None:
            columns = []
            for data in datasets:
                columns.extend(c for c in data.columns if c not in columns)
        blocks, weights = [], []
        for data in datasets:
            block = np.full((len(data), len(columns)), MISSING, dtype=np.int64)
            for j, column in enumerate(columns):
                if data.has_column(column):
                    block[:, j] = data.column(column)
            blocks.append(block)
            weights.append(data.counts)
        if not blocks:
            return Dataset.empty(columns)
        return Dataset(tuple(columns), np.vstack(blocks), np.concatenate(weights)).aggregate()

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(v) for v in row): int(n) for row, n in zip(self.values, self.counts)}


@dataclass(frozen=True, eq=False)
class BiasedDataset:
    """Selected records D_{S=1} plus the number N_{S=0} of records lost to selection."""

    selected: Dataset
    n_unselected: int = 0

    def __post_init__(self) -> None:
        if self.n_unselected < 0:
            raise DataError("N_{S=0} must be non-negative")
        if not self.selected.is_complete():
            raise DataError("Selected records must be complete")

    @property
    def n_selected(self) -> int:
        return self.selected.total

    @property
    def total(self) -> int:
        return self.n_selected + self.n_unselected

    @property
    def p_selected(self) -> float:
        return self.n_selected / self.total if self.total else 0.0

    def to_dataset(self, selector_var: str = "S") -> Dataset:
        """
        Flatten into one dataset with an observed selector column: selected
        records get S=1, the unselected count becomes one all-missing row
        with S=0.
        """
        selected = self.selected.with_column(selector_var, np.ones(len(self.selected), dtype=np.int64))
        if self.n_unselected == 0:
            return selected
        row = np.full((1, len(selected.columns)), MISSING, dtype=np.int64)
        row[0, -1] = 0
        lost = Dataset(selected.columns, row, np.array([self.n_unselected]))
        return Dataset.concat([selected, lost], columns=selected.columns)


def _as_state(cell) -> int | str:
    if isinstance(cell, (int, np.integer)):
        return int(cell)
    if isinstance(cell, float) and cell.is_integer():
        return int(cell)
    return str(cell)
