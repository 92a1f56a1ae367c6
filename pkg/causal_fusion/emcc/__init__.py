"""
EMCC Package

Expectation-maximisation for compatible counterfactuals: repeated EM runs
sampling the exogenous distributions compatible with a model and its data.
"""

from .schemas import (
    InitLaw,
    RunStatus,
    EmccConfig,
    EmRunResult,
    CompatibleSet,
)

from .estep import (
    CompiledData,
    EStepResult,
)

from .runner import (
    run_rng,
    initialize_exogenous,
    em_step_unbiased,
    em_step_biased,
    run_em,
    emcc,
)

from .audit import compatibility_gap

__all__ = [
    # Enums
    "InitLaw",
    "RunStatus",
    # Configuration & results
    "EmccConfig",
    "EmRunResult",
    "CompatibleSet",
    # Compiled steps
    "CompiledData",
    "EStepResult",
    # Runs
    "run_rng",
    "initialize_exogenous",
    "em_step_unbiased",
    "em_step_biased",
    "run_em",
    "emcc",
    # Audit
    "compatibility_gap",
]
