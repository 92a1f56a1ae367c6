"""
Counterfactual Query Pydantic Schemas

The structure follows: QuerySpec > worlds (interventions) + WorldEvent
(evidence and target conjuncts); evaluation yields a QueryResult.

CONVENTIONS:
- World 0 is the factual world; worlds[k-1] lists the interventions of world k
- PNS, PN and PS are lowered onto worlds and events; x, y denote the
  declared cause and effect states and x', y' the other state
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from ..errors import ModelError
from ..scm.schemas import PSCM, StateRef


# ============================================================================
# Enums as Literal Types
# ============================================================================

QueryKind = Literal["PNS", "PN", "PS", "general"]


# ============================================================================
# Query
# ============================================================================


class WorldEvent(BaseModel):
    """Variable = state in one world."""

    model_config = ConfigDict(frozen=True)

    variable: str
    state: StateRef
    world: int = Field(0, ge=0, description="0 = factual world")


class QuerySpec(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    kind: QueryKind
    cause: Optional[str] = Field(None, description="X of PNS/PN/PS")
    effect: Optional[str] = Field(None, description="Y of PNS/PN/PS")
    cause_state: StateRef = Field(1, alias="causeState", description="The 'true' state x of the cause")
    effect_state: StateRef = Field(1, alias="effectState", description="The 'true' state y of the effect")
    evidence: list[WorldEvent] = Field(default_factory=list, description="Conditioning events")
    worlds: list[dict[str, StateRef]] = Field(
        default_factory=list, description="Interventions of worlds 1..n (general queries)"
    )
    target: list[WorldEvent] = Field(default_factory=list, description="Queried conjunction (general queries)")
    context: dict[str, StateRef] = Field(
        default_factory=dict, description="Regime index (W) and chance group (W_study) for fused models"
    )

    @model_validator(mode="after")
    def _check_kind(self) -> "QuerySpec":
        if self.kind == "general":
            if not self.target:
                raise ValueError("General queries need a target")
            for event in [*self.target, *self.evidence]:
                if event.world > len(self.worlds):
                    raise ValueError(f"Event on world {event.world}, but only {len(self.worlds)} counterfactual worlds")
        else:
            if not self.cause or not self.effect:
                raise ValueError(f"{self.kind} needs a cause and an effect")
            if self.cause == self.effect:
                raise ValueError("Cause and effect must differ")
            if self.worlds or self.target:
                raise ValueError(f"{self.kind} queries define their own worlds and target")
            if any(event.world != 0 for event in self.evidence):
                raise ValueError(f"{self.kind} evidence lives in the factual world")
        return self

    def lower(self, model: PSCM) -> "LoweredQuery":
        """Resolve states against `model` and express the query as worlds and events."""

        def check(variable: str) -> None:
            if not model.has_variable(variable) or model.variable(variable).kind != "endogenous":
                raise ModelError(f"Query references unknown endogenous variable {variable!r}")

        def resolve(variable: str, state: StateRef) -> int:
            check(variable)
            try:
                return model.variable(variable).state_index(state)
            except ValueError as e:
                raise ModelError(str(e)) from e

        evidence = tuple((e.variable, resolve(e.variable, e.state), e.world) for e in self.evidence)
        if self.kind == "general":
            worlds = tuple({v: resolve(v, s) for v, s in world.items()} for world in self.worlds)
            target = tuple((e.variable, resolve(e.variable, e.state), e.world) for e in self.target)
            return LoweredQuery(worlds=worlds, target=target, evidence=evidence)

        for variable in (self.cause, self.effect):
            check(variable)
            if model.card(variable) != 2:
                raise ModelError(f"{self.kind} needs a Boolean {variable}, which has {model.card(variable)} states")
        x = resolve(self.cause, self.cause_state)
        y = resolve(self.effect, self.effect_state)
        x_other, y_other = 1 - x, 1 - y
        X, Y = self.cause, self.effect
        if self.kind == "PNS":
            return LoweredQuery(
                worlds=({X: x}, {X: x_other}),
                target=((Y, y, 1), (Y, y_other, 2)),
                evidence=evidence,
            )
        if self.kind == "PN":
            return LoweredQuery(
                worlds=({X: x_other},),
                target=((Y, y_other, 1),),
                evidence=(*evidence, (X, x, 0), (Y, y, 0)),
            )
        return LoweredQuery(
            worlds=({X: x},),
            target=((Y, y, 1),),
            evidence=(*evidence, (X, x_other, 0), (Y, y_other, 0)),
        )


@dataclass(frozen=True)
class LoweredQuery:
    """A query over state indices: P(target | evidence) across worlds 0..n."""

    worlds: tuple[dict[str, int], ...]
    target: tuple[tuple[str, int, int], ...]
    evidence: tuple[tuple[str, int, int], ...]

    @property
    def n_worlds(self) -> int:
        return len(self.worlds) + 1


# ============================================================================
# Results
# ============================================================================


class QueryResult(BaseModel):
    """Query values over the compatible runs; the range is an inner approximation of the bounds."""

    model_config = ConfigDict(frozen=True)

    per_run: list[float] = Field(..., description="One value per evaluated compatible FSCM")
    run_indices: list[int] = Field(..., description="EM run index of each value")
    n_excluded: int = Field(0, ge=0, description="Runs excluded for not reaching the global maximum")
    n_undefined: int = Field(0, ge=0, description="Runs where the evidence had probability zero")

    @model_validator(mode="after")
    def _check_values(self) -> "QueryResult":
        if not self.per_run:
            raise ValueError("A query result needs at least one value")
        if len(self.per_run) != len(self.run_indices):
            raise ValueError("per_run and run_indices differ in length")
        if any(not 0.0 <= v <= 1.0 for v in self.per_run):
            raise ValueError("Query values must lie in [0, 1]")
        return self

    @computed_field
    @property
    def range(self) -> tuple[float, float]:
        return (min(self.per_run), max(self.per_run))

    @property
    def lower(self) -> float:
        return self.range[0]

    @property
    def upper(self) -> float:
        return self.range[1]

    @property
    def width(self) -> float:
        return self.upper - self.lower
