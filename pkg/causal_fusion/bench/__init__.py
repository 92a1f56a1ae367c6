"""
Bench Package

Random Erdős–Rényi models, synthetic studies and the fusion and
selection-bias experiments run over them.
"""

from .schemas import (
    ChanceVariant,
    Ordering,
    BenchConfig,
    Roles,
    ExperimentRecord,
    BiasRecord,
)

from .generation import (
    sample_er_pscm,
    sample_ground_truth,
    choose_roles,
    random_selector,
    sample_datasets,
)

from .metrics import (
    BIAS_BINS,
    relative_shrink,
    normalized_bias_effect,
    quartiles,
    summarize_shrinks,
    summarize_bias,
)

from .experiment import (
    STAGES,
    stage_label,
    stage_range,
    run_model,
    run_bias_model,
    run_fusion_experiment,
    run_bias_experiment,
    records_to_frame,
    bias_records_to_frame,
)

__all__ = [
    # Enums
    "ChanceVariant",
    "Ordering",
    # Configuration & records
    "BenchConfig",
    "Roles",
    "ExperimentRecord",
    "BiasRecord",
    # Generation
    "sample_er_pscm",
    "sample_ground_truth",
    "choose_roles",
    "random_selector",
    "sample_datasets",
    # Metrics
    "BIAS_BINS",
    "relative_shrink",
    "normalized_bias_effect",
    "quartiles",
    "summarize_shrinks",
    "summarize_bias",
    # Experiments
    "STAGES",
    "stage_label",
    "stage_range",
    "run_model",
    "run_bias_model",
    "run_fusion_experiment",
    "run_bias_experiment",
    "records_to_frame",
    "bias_records_to_frame",
]
