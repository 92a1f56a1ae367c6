"""
Benchmark Pydantic Schemas

The structure follows: BenchConfig -> per model Roles -> ExperimentRecord
(fusion stages) or BiasRecord (single biased observational dataset).
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import (
    DEFAULT_EDGE_PROBABILITY,
    DEFAULT_MAX_EXO_CARD,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_RUNS,
    DEFAULT_SEED,
    DEFAULT_SELECTOR_ATTEMPTS,
    DEFAULT_THREADS,
)


# ============================================================================
# Enums as Literal Types
# ============================================================================

ChanceVariant = Literal["global", "local"]

Ordering = Literal["biased_first", "interventional_first"]


# ============================================================================
# Configuration
# ============================================================================


class BenchConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    n_endogenous: tuple[int, int] = Field((5, 17), alias="nEndogenous", description="Range of |V|")
    edge_probability: float = Field(DEFAULT_EDGE_PROBABILITY, ge=0.0, le=1.0, alias="edgeProbability")
    max_exo_card: int = Field(DEFAULT_MAX_EXO_CARD, ge=2, alias="maxExoCard")
    dataset_size: tuple[int, int] = Field((1000, 5500), alias="datasetSize", description="Range of the per-study size")
    selector_band: tuple[float, float] = Field((0.25, 0.75), alias="selectorBand", description="Accepted P(S=1)")
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2**64)
    n_models: int = Field(50, ge=1, alias="nModels")
    runs: int = Field(DEFAULT_RUNS, ge=1)
    max_iterations: int = Field(DEFAULT_MAX_ITERATIONS, ge=1, alias="maxIterations")
    threads: int = Field(DEFAULT_THREADS, ge=1)
    selector_attempts: int = Field(DEFAULT_SELECTOR_ATTEMPTS, ge=1, alias="selectorAttempts")
    model_attempts: int = Field(100, ge=1, alias="modelAttempts", description="Resamples allowed per model slot")
    variants: tuple[ChanceVariant, ...] = Field(("global", "local"), min_length=1)

    @model_validator(mode="after")
    def _check_ranges(self) -> "BenchConfig":
        lo, hi = self.n_endogenous
        if not 3 <= lo <= hi:
            raise ValueError("n_endogenous must be a range lo <= hi with lo >= 3")
        lo, hi = self.dataset_size
        if not 2 <= lo <= hi:
            raise ValueError("dataset_size must be a range lo <= hi with lo >= 2")
        lo, hi = self.selector_band
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError("selector_band must satisfy 0 <= lo < hi <= 1")
        return self


# ============================================================================
# Records
# ============================================================================


class Roles(BaseModel):
    model_config = ConfigDict(frozen=True)

    input: str
    covariate: str
    target: str


class ExperimentRecord(BaseModel):
    """PNS(input -> target) ranges of one model as the studies are added."""

    model_config = ConfigDict(frozen=True, protected_namespaces=())

    model_id: int
    n_endogenous: int
    roles: Roles
    dataset_size: int
    p_selected: float = Field(..., ge=0.0, le=1.0, description="P(S=1) of the biased study")
    ranges: dict[str, tuple[float, float]] = Field(..., description="'<variant>:<stage>' -> (lower, upper)")
    shrinks: dict[str, float] = Field(
        default_factory=dict, description="'<variant>:<refined>_vs_<base>' -> relative shrink"
    )

    @model_validator(mode="after")
    def _check_ranges(self) -> "ExperimentRecord":
        for key, (lower, upper) in self.ranges.items():
            if not 0.0 <= lower <= upper <= 1.0:
                raise ValueError(f"Range {key} = ({lower}, {upper}) is not inside [0, 1]")
        if any(shrink > 1.0 + 1e-12 for shrink in self.shrinks.values()):
            raise ValueError("Relative shrinks cannot exceed one")
        return self


class BiasRecord(BaseModel):
    """Biased against unbiased PNS range of one observational dataset."""

    model_config = ConfigDict(frozen=True, protected_namespaces=())

    model_id: int
    p_selected: float = Field(..., ge=0.0, le=1.0)
    biased: tuple[float, float]
    unbiased: tuple[float, float]
    lower_effect: float
    upper_effect: float
