"""
SCM Tools

Construction, validation, transformation, simulation and persistence of
structural causal models.
"""

from .canonical import (
    canonical_cardinality,
    enumerate_functions,
    build_canonical_pscm,
    c_components,
)

from .validation import (
    Violation,
    ValidationReport,
    validate_pscm,
)

from .transforms import remove_exogenous_states

from .simulation import (
    propagate,
    sample_exogenous,
    sample_endogenous,
    enumerate_exogenous,
    fill_deterministic_columns,
)

from .io import (
    CanonicalModelSpec,
    model_to_json,
    model_from_json,
    load_model,
    dump_model,
    read_frame,
    load_dataset,
    dump_dataset,
)

__all__ = [
    # Canonical models
    "canonical_cardinality",
    "enumerate_functions",
    "build_canonical_pscm",
    "c_components",
    # Validation
    "Violation",
    "ValidationReport",
    "validate_pscm",
    # Transformations
    "remove_exogenous_states",
    # Simulation
    "propagate",
    "sample_exogenous",
    "sample_endogenous",
    "enumerate_exogenous",
    "fill_deterministic_columns",
    # Persistence
    "CanonicalModelSpec",
    "model_to_json",
    "model_from_json",
    "load_model",
    "dump_model",
    "read_frame",
    "load_dataset",
    "dump_dataset",
]
