"""
EMCC Pydantic Schemas

EmccConfig drives a batch of EM runs; every run yields an EmRunResult and
the batch is collected in a CompatibleSet.
"""

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from ..config import (
    DEFAULT_GAP_PER_RECORD,
    DEFAULT_LL_TOLERANCE,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_RUNS,
    DEFAULT_SEED,
    DEFAULT_STALL_TOLERANCE,
    DEFAULT_THREADS,
    SADDLE_PERTURBATION,
)
from ..scm.schemas import FSCM


# ============================================================================
# Enums as Literal Types
# ============================================================================

InitLaw = Literal["uniform_dirichlet", "custom"]

RunStatus = Literal["global_max", "saddle_suspect", "max_iters", "incompatible_suspect"]


# ============================================================================
# Configuration
# ============================================================================


class EmccConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    runs: int = Field(DEFAULT_RUNS, ge=1, description="Number r of independent EM runs")
    max_iterations: int = Field(DEFAULT_MAX_ITERATIONS, ge=1, alias="maxIterations")
    ll_tolerance: float = Field(DEFAULT_LL_TOLERANCE, gt=0, alias="llTolerance")
    gap_per_record: float = Field(
        DEFAULT_GAP_PER_RECORD,
        ge=0,
        alias="gapPerRecord",
        description="Per-record log-likelihood gap to the best run accepted by near-best aggregation",
    )
    stall_tolerance: float = Field(
        DEFAULT_STALL_TOLERANCE,
        gt=0,
        alias="stallTolerance",
        description="Gain below which an ascent still short of λ* stops",
    )
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2**64)
    init: InitLaw = "uniform_dirichlet"
    initial_pmfs: Optional[dict[str, list]] = Field(
        None, alias="initialPmfs", description="Starting PMFs for init='custom'"
    )
    threads: int = Field(DEFAULT_THREADS, ge=1)
    saddle_restarts: int = Field(1, ge=0, alias="saddleRestarts")
    perturbation: float = Field(SADDLE_PERTURBATION, gt=0, lt=1)

    @model_validator(mode="after")
    def _check_custom_init(self) -> "EmccConfig":
        if self.init == "custom" and not self.initial_pmfs:
            raise ValueError("init='custom' requires initial_pmfs")
        return self

    def near_best_tolerance(self, n_records: float) -> float:
        """Largest gap to the best run accepted by near-best aggregation for n_records records."""
        return max(self.ll_tolerance, self.gap_per_record * n_records)


# ============================================================================
# Results
# ============================================================================


class EmRunResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    run_index: int = Field(..., ge=0)
    fscm: FSCM
    iterations: int = Field(..., ge=0, description="Number of M-steps performed")
    ll_trace: list[float] = Field(..., description="Log-likelihood of the final ascent, one entry per E-step")
    status: RunStatus
    restarts: int = Field(0, ge=0, description="Perturbed restarts performed")
    skipped_records: int = Field(0, ge=0, description="Records skipped for zero probability")

    @property
    def final_ll(self) -> float:
        return self.ll_trace[-1] if self.ll_trace else float("-inf")

    def theta(self, name: str) -> np.ndarray:
        return self.fscm.theta(name)


class CompatibleSet(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    results: list[EmRunResult]
    ll_star: float
    n_records: int = Field(..., ge=0)
    tolerance: float = Field(..., ge=0, description="Gap to λ* accepted as the global maximum")
    near_best_tolerance: Optional[float] = Field(None, ge=0, description="Gap to the best run for near-best runs")

    @computed_field
    @property
    def compatible(self) -> bool:
        """False when no run reached λ*: the data look incompatible with the model."""
        return any(r.status == "global_max" for r in self.results)

    @property
    def best_ll(self) -> float:
        return max((r.final_ll for r in self.results), default=float("-inf"))

    def global_max_runs(self) -> list[EmRunResult]:
        return [r for r in self.results if r.status == "global_max"]

    def near_best_runs(self) -> list[EmRunResult]:
        """Runs within the near-best gap of the best run (for data not exactly compatible)."""
        best = self.best_ll
        gap = self.tolerance if self.near_best_tolerance is None else self.near_best_tolerance
        return [r for r in self.results if r.status != "incompatible_suspect" and best - r.final_ll <= gap]

    def status_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for result in self.results:
            counts[result.status] = counts.get(result.status, 0) + 1
        return counts
