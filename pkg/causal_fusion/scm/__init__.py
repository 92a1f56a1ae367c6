"""
SCM Core Package

Variables, graphs, structural equations, PSCM/FSCM models, canonical
structural equations and c-components.
"""

from .schemas import (
    Variable,
    CausalGraph,
    StructuralEquation,
    RegimeInfo,
    PSCM,
    FSCM,
    CComponent,
    CComponentDecomposition,
    MISSING,
    Dataset,
    BiasedDataset,
)

from .tools import (
    canonical_cardinality,
    build_canonical_pscm,
    c_components,
    ValidationReport,
    validate_pscm,
    remove_exogenous_states,
    propagate,
    sample_endogenous,
    enumerate_exogenous,
    load_model,
    dump_model,
    load_dataset,
    dump_dataset,
)

__all__ = [
    # Models
    "Variable",
    "CausalGraph",
    "StructuralEquation",
    "RegimeInfo",
    "PSCM",
    "FSCM",
    "CComponent",
    "CComponentDecomposition",
    # Data
    "MISSING",
    "Dataset",
    "BiasedDataset",
    # Tools
    "canonical_cardinality",
    "build_canonical_pscm",
    "c_components",
    "ValidationReport",
    "validate_pscm",
    "remove_exogenous_states",
    "propagate",
    "sample_endogenous",
    "enumerate_exogenous",
    "load_model",
    "dump_model",
    "load_dataset",
    "dump_dataset",
]
