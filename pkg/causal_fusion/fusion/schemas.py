"""
Fusion Pydantic Schemas

The structure follows: StudySpec (dataset + intervention design + optional
Selector) -> MergedDataset (records over V, W and optionally S).
"""

from __future__ import annotations

import math
import re
from typing import Any, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import DataError, ModelError
from ..scm.schemas import PSCM, BiasedDataset, Dataset


# ============================================================================
# Selector
# ============================================================================


class Selector(BaseModel):
    """Deterministic Boolean g over the states of a set of endogenous variables."""

    model_config = ConfigDict(frozen=True)

    scope: tuple[str, ...] = Field(..., min_length=1)
    cards: tuple[int, ...] = Field(..., description="Cardinalities of the scope variables")
    table: tuple[int, ...] = Field(..., description="g over the scope states, row-major, 1 = selected")
    expression: Optional[str] = Field(None, description="Source expression, when parsed from one")

    @model_validator(mode="after")
    def _check_table(self) -> "Selector":
        if len(self.cards) != len(self.scope):
            raise ValueError("Selector scope and cardinalities differ in length")
        if len(self.table) != math.prod(self.cards):
            raise ValueError(f"Selector table has {len(self.table)} entries, expected {math.prod(self.cards)}")
        if any(v not in (0, 1) for v in self.table):
            raise ValueError("Selector table entries must be 0 or 1")
        if not any(self.table):
            raise ValueError("Selector rejects every state: no record would survive")
        return self

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=np.int64).reshape(self.cards)

    @property
    def key(self) -> tuple:
        return (self.scope, self.table)

    def evaluate(self, columns: Mapping[str, np.ndarray]) -> np.ndarray:
        """g at each row of the given state columns (boolean array)."""
        return self.array[tuple(np.asarray(columns[v]) for v in self.scope)] == 1

    def mask(self, data: Dataset) -> np.ndarray:
        if not data.is_complete(self.scope):
            raise DataError(f"Records must be complete over the selector scope {self.scope}")
        return self.evaluate({v: data.column(v) for v in self.scope})

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_table(cls, model: PSCM, scope: Sequence[str], table: Sequence[int]) -> "Selector":
        return cls(scope=tuple(scope), cards=tuple(model.card(v) for v in scope), table=tuple(int(t) for t in table))

    @classmethod
    def all_true(cls, model: PSCM, scope: Sequence[str]) -> "Selector":
        cards = tuple(model.card(v) for v in scope)
        return cls(scope=tuple(scope), cards=cards, table=(1,) * math.prod(cards))

    @classmethod
    def from_expression(cls, model: PSCM, expression: str) -> "Selector":
        """
        Parse expressions such as
        ``Treatment == drug and Gender == female or Treatment == 'no drug' and Gender == male``.

        `and` binds tighter than `or`; parentheses group; `==` and `!=` compare
        a variable with a state name (quoted when it contains spaces) or index.
        """
        tree = _ExpressionParser(expression).parse()
        names = _expression_variables(tree)
        for name in names:
            if not model.has_variable(name) or model.variable(name).kind != "endogenous":
                raise ModelError(f"Selector expression references unknown endogenous variable {name!r}")
        scope = tuple(v for v in model.endogenous if v in names)
        cards = tuple(model.card(v) for v in scope)
        grid = dict(zip(scope, np.indices(cards))) if scope else {}
        values = _evaluate_expression(tree, grid, model)
        return cls(scope=scope, cards=cards, table=tuple(values.astype(int).reshape(-1).tolist()), expression=expression)


_TOKEN = re.compile(r"\s*(?:(==|!=|\(|\))|'([^']*)'|\"([^\"]*)\"|([^\s()=!']+))")


class _ExpressionParser:
    def __init__(self, text: str):
        self.tokens: list[tuple[str, str]] = []
        position = 0
        text = text.strip()
        while position < len(text):
            match = _TOKEN.match(text, position)
            if match is None or match.end() == position:
                raise ValueError(f"Cannot parse selector expression near {text[position:]!r}")
            operator, single, double, word = match.groups()
            if operator:
                self.tokens.append(("op", operator))
            elif single is not None or double is not None:
                self.tokens.append(("str", single if single is not None else double))
            elif word in ("and", "or"):
                self.tokens.append(("op", word))
            else:
                self.tokens.append(("word", word))
            position = match.end()
        self.index = 0

    def _peek(self) -> Optional[tuple[str, str]]:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def _take(self) -> tuple[str, str]:
        token = self._peek()
        if token is None:
            raise ValueError("Unexpected end of selector expression")
        self.index += 1
        return token

    def parse(self) -> Any:
        tree = self._disjunction()
        if self._peek() is not None:
            raise ValueError(f"Unexpected token {self._peek()[1]!r} in selector expression")
        return tree

    def _disjunction(self) -> Any:
        terms = [self._conjunction()]
        while self._peek() == ("op", "or"):
            self._take()
            terms.append(self._conjunction())
        return ("or", terms) if len(terms) > 1 else terms[0]

    def _conjunction(self) -> Any:
        terms = [self._atom()]
        while self._peek() == ("op", "and"):
            self._take()
            terms.append(self._atom())
        return ("and", terms) if len(terms) > 1 else terms[0]

    def _atom(self) -> Any:
        if self._peek() == ("op", "("):
            self._take()
            tree = self._disjunction()
            if self._take() != ("op", ")"):
                raise ValueError("Missing closing parenthesis in selector expression")
            return tree
        kind, name = self._take()
        if kind != "word":
            raise ValueError(f"Expected a variable name, got {name!r}")
        kind, operator = self._take()
        if operator not in ("==", "!="):
            raise ValueError(f"Expected == or != after {name}, got {operator!r}")
        kind, state = self._take()
        if kind == "op":
            raise ValueError(f"Expected a state after {name} {operator}")
        return (operator, name, state)


def _expression_variables(tree: Any) -> set[str]:
    if tree[0] in ("and", "or"):
        return set().union(*(_expression_variables(t) for t in tree[1]))
    return {tree[1]}


def _evaluate_expression(tree: Any, grid: Mapping[str, np.ndarray], model: PSCM) -> np.ndarray:
    if tree[0] == "and":
        return np.logical_and.reduce([_evaluate_expression(t, grid, model) for t in tree[1]])
    if tree[0] == "or":
        return np.logical_or.reduce([_evaluate_expression(t, grid, model) for t in tree[1]])
    operator, name, state = tree
    variable = model.variable(name)
    try:
        index = variable.state_index(state)
    except ValueError:
        if not state.isdigit():
            raise
        index = variable.state_index(int(state))
    equal = grid[name] == index
    return equal if operator == "==" else ~equal


# ============================================================================
# Studies
# ============================================================================


class StudySpec(BaseModel):
    """One dataset together with the design that produced it."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, populate_by_name=True)

    name: str = Field(..., min_length=1)
    dataset: Dataset
    intervened_vars: tuple[str, ...] = Field((), alias="intervenedVars")
    intervened_states: tuple[tuple[int, ...], ...] = Field(
        (), alias="intervenedStates", description="Joint intervened assignments; derived from the data when omitted"
    )
    selector: Optional[Selector] = None
    n_unselected: Optional[int] = Field(
        None, ge=0, alias="nUnselected", description="N_{S=0} when the dataset holds the selected records only"
    )
    local_chance_vars: tuple[str, ...] = Field((), alias="localChanceVars")

    @model_validator(mode="before")
    @classmethod
    def _derive_states(cls, values: Any) -> Any:
        if not isinstance(values, dict):
            return values
        variables = tuple(values.get("intervened_vars", values.get("intervenedVars", ())) or ())
        states = values.get("intervened_states", values.get("intervenedStates", ()))
        data = values.get("dataset")
        if variables and not states and isinstance(data, Dataset) and data.total:
            present = data.project(list(variables))
            values = dict(values)
            values["intervened_states"] = tuple(tuple(int(v) for v in row) for row in present.values)
            values.pop("intervenedStates", None)
        return values

    @model_validator(mode="after")
    def _check_design(self) -> "StudySpec":
        if bool(self.intervened_vars) != bool(self.intervened_states):
            raise ValueError("intervened_vars and intervened_states must be both empty or both given")
        if any(len(state) != len(self.intervened_vars) for state in self.intervened_states):
            raise ValueError("Every intervened state must assign all intervened variables")
        if self.intervened_vars:
            allowed = set(self.intervened_states)
            for row in self.dataset.project(list(self.intervened_vars)).values:
                if tuple(int(v) for v in row) not in allowed:
                    raise ValueError(f"Study {self.name}: record with intervened values {tuple(row)} outside the design")
        if self.n_unselected is not None and self.selector is None:
            raise ValueError(f"Study {self.name}: n_unselected given without a selector")
        return self

    @property
    def is_interventional(self) -> bool:
        return bool(self.intervened_vars)

    @property
    def is_biased(self) -> bool:
        return self.selector is not None

    def biased(self) -> BiasedDataset:
        """D_{S=1} and N_{S=0} of a biased study."""
        if self.selector is None:
            return BiasedDataset(selected=self.dataset, n_unselected=0)
        if self.n_unselected is None:
            from .selection import partition_by_selector

            return partition_by_selector(self.dataset, self.selector)
        if not np.all(self.selector.mask(self.dataset)):
            raise DataError(f"Study {self.name}: selected records must satisfy the selector")
        return BiasedDataset(selected=self.dataset, n_unselected=self.n_unselected)


class MergedDataset(BaseModel):
    """Records of every study over (V, W[, S]), W indexing the interventional regimes."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    dataset: Dataset
    endogenous: tuple[str, ...]
    w_domain: tuple[str, ...]
    w_interventions: tuple[dict[str, int], ...]
    w_study: tuple[int, ...] = Field(..., description="Position of the study that introduced each W state")
    w_selector: tuple[Optional[Selector], ...]
    study_names: tuple[str, ...]
    index_var: str = "W"
    selector_var: Optional[str] = None

    @property
    def total(self) -> int:
        return self.dataset.total

    def w_index(self, state: str | int) -> int:
        if isinstance(state, int):
            return state
        try:
            return self.w_domain.index(state)
        except ValueError:
            raise DataError(f"Unknown {self.index_var} state {state!r}; expected one of {list(self.w_domain)}") from None
