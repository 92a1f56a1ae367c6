"""
causal_fusion

Bounds on counterfactual queries (PNS, PN, PS and general multi-world
queries) of discrete structural causal models, learnt by repeated EM from
any mix of observational, interventional and selection-biased data.
"""

from .errors import (
    CausalFusionError,
    ModelError,
    CardinalityOverflowError,
    FactorError,
    DataError,
    IncompatibilityError,
    UndefinedConditionalError,
    UndefinedMetricError,
    BudgetExceededError,
    SelectorBandError,
)

from .scm import (
    Variable,
    PSCM,
    FSCM,
    Dataset,
    BiasedDataset,
    build_canonical_pscm,
    validate_pscm,
    load_model,
    load_dataset,
)

from .emcc import EmccConfig, CompatibleSet, emcc

from .fusion import (
    Selector,
    StudySpec,
    merge_studies,
    build_auxiliary,
    attach_local_chances,
    learning_problem,
)

from .counterfactual import (
    QuerySpec,
    QueryResult,
    evaluate_query,
    aggregate_range,
    brute_force_bounds,
)

__version__ = "0.1.0"

__all__ = [
    # Errors
    "CausalFusionError",
    "ModelError",
    "CardinalityOverflowError",
    "FactorError",
    "DataError",
    "IncompatibilityError",
    "UndefinedConditionalError",
    "UndefinedMetricError",
    "BudgetExceededError",
    "SelectorBandError",
    # Models & data
    "Variable",
    "PSCM",
    "FSCM",
    "Dataset",
    "BiasedDataset",
    "build_canonical_pscm",
    "validate_pscm",
    "load_model",
    "load_dataset",
    # Learning
    "EmccConfig",
    "CompatibleSet",
    "emcc",
    # Fusion
    "Selector",
    "StudySpec",
    "merge_studies",
    "build_auxiliary",
    "attach_local_chances",
    "learning_problem",
    # Queries
    "QuerySpec",
    "QueryResult",
    "evaluate_query",
    "aggregate_range",
    "brute_force_bounds",
]
