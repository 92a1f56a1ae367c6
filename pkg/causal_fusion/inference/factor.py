"""
Dense discrete factors.

A Factor is an immutable table over an ordered scope. Products and sums
are delegated to numpy.einsum with integer sublists, one label per variable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import FactorError


@dataclass(frozen=True, eq=False)
class Factor:
    scope: tuple[str, ...]
    cards: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        object.__setattr__(self, "scope", tuple(self.scope))
        object.__setattr__(self, "cards", tuple(int(c) for c in self.cards))
        if len(self.scope) != len(self.cards):
            raise FactorError(f"Scope {self.scope} and cardinalities {self.cards} differ in length")
        if len(set(self.scope)) != len(self.scope):
            raise FactorError(f"Repeated variable in scope {self.scope}")
        if values.shape != self.cards:
            if values.size != int(np.prod(self.cards, dtype=np.int64)):
                raise FactorError(f"{values.size} values for cardinalities {self.cards}")
            values = values.reshape(self.cards)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise FactorError("Factor entries must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def scalar(cls, value: float = 1.0) -> Factor:
        return cls((), (), np.array(value, dtype=float))

    @classmethod
    def ones(cls, scope: Sequence[str], cards: Sequence[int]) -> Factor:
        return cls(tuple(scope), tuple(cards), np.ones(tuple(cards)))

    @classmethod
    def indicator(cls, variable: str, card: int, state: int) -> Factor:
        values = np.zeros(card)
        values[state] = 1.0
        return cls((variable,), (card,), values)

    # ------------------------------------------------------------------
    # Accessors
    # ------------------------------------------------------------------

    def card_of(self, variable: str) -> int:
        return self.cards[self.scope.index(variable)]

    def total(self) -> float:
        return float(self.values.sum())

    def is_zero(self) -> bool:
        return not np.any(self.values)

    # ------------------------------------------------------------------
    # Algebra
    # ------------------------------------------------------------------

    def __mul__(self, other: Factor) -> Factor:
        return multiply(self, other)

    def marginalize(self, variable: str) -> Factor:
        return marginalize(self, variable)

    def sum_out(self, variables: Iterable[str]) -> Factor:
        drop = set(variables)
        missing = drop - set(self.scope)
        if missing:
            raise FactorError(f"Cannot sum out {sorted(missing)}: not in scope {self.scope}")
        axes = tuple(i for i, v in enumerate(self.scope) if v in drop)
        keep = [i for i, v in enumerate(self.scope) if v not in drop]
        return Factor(
            tuple(self.scope[i] for i in keep), tuple(self.cards[i] for i in keep), self.values.sum(axis=axes)
        )

    def reduce(self, evidence: Mapping[str, int]) -> Factor:
        """Slice the factor at the evidence states of the variables it contains."""
        relevant = {v: s for v, s in evidence.items() if v in self.scope}
        if not relevant:
            return self
        index = tuple(relevant.get(v, slice(None)) for v in self.scope)
        keep = [i for i, v in enumerate(self.scope) if v not in relevant]
        return Factor(tuple(self.scope[i] for i in keep), tuple(self.cards[i] for i in keep), self.values[index])

    def transpose(self, order: Sequence[str]) -> Factor:
        if sorted(order) != sorted(self.scope):
            raise FactorError(f"Order {list(order)} is not a permutation of {self.scope}")
        axes = [self.scope.index(v) for v in order]
        return Factor(tuple(order), tuple(self.cards[i] for i in axes), np.transpose(self.values, axes))

    def normalize(self) -> Factor:
        total = self.total()
        if total == 0:
            return self
        return Factor(self.scope, self.cards, self.values / total)


def multiply(a: Factor, b: Factor) -> Factor:
    """Pointwise product over the union of the scopes."""
    for variable in set(a.scope) & set(b.scope):
        if a.card_of(variable) != b.card_of(variable):
            raise FactorError(
                f"Cardinality mismatch for {variable}: {a.card_of(variable)} vs {b.card_of(variable)}"
            )
    scope = list(a.scope) + [v for v in b.scope if v not in a.scope]
    labels = {v: i for i, v in enumerate(scope)}
    cards = [a.card_of(v) if v in a.scope else b.card_of(v) for v in scope]
    values = np.einsum(
        a.values, [labels[v] for v in a.scope], b.values, [labels[v] for v in b.scope], list(range(len(scope)))
    )
    return Factor(tuple(scope), tuple(cards), values)


def marginalize(f: Factor, out: str) -> Factor:
    """Sum a single variable out of a factor."""
    if out not in f.scope:
        raise FactorError(f"Cannot marginalize {out}: not in scope {f.scope}")
    return f.sum_out([out])


def product(factors: Sequence[Factor]) -> Factor:
    """Product of many factors in one einsum call."""
    if not factors:
        return Factor.scalar()
    scope: list[str] = []
    cards: dict[str, int] = {}
    for factor in factors:
        for variable, card in zip(factor.scope, factor.cards):
            if variable in cards:
                if cards[variable] != card:
                    raise FactorError(f"Cardinality mismatch for {variable}: {cards[variable]} vs {card}")
            else:
                cards[variable] = card
                scope.append(variable)
    labels = {v: i for i, v in enumerate(scope)}
    operands = []
    for factor in factors:
        operands += [factor.values, [labels[v] for v in factor.scope]]
    values = np.einsum(*operands, list(range(len(scope))), optimize=len(factors) > 2)
    return Factor(tuple(scope), tuple(cards[v] for v in scope), values)


def se_to_cpt(equation, model) -> Factor:
    """
    Degenerate conditional table of a structural equation, scope (child, *parents):
    1 where the child state equals f(parents), 0 elsewhere.
    """
    table = model.se_array(equation.child)
    card = model.card(equation.child)
    parent_cards = tuple(model.card(p) for p in equation.parent_order)
    values = (np.arange(card).reshape((card,) + (1,) * table.ndim) == table[None, ...]).astype(float)
    return Factor((equation.child, *equation.parent_order), (card, *parent_cards), values)
