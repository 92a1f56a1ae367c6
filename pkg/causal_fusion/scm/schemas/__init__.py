"""
SCM Schemas

Pydantic models for causal models and the record containers used for data.
"""

from .model import (
    VariableKind,
    StateRef,
    Variable,
    CausalGraph,
    StructuralEquation,
    RegimeInfo,
    PSCM,
    FSCM,
    CComponent,
    CComponentDecomposition,
)

from .dataset import (
    MISSING,
    COUNT_COLUMN,
    Dataset,
    BiasedDataset,
)

__all__ = [
    # Enums
    "VariableKind",
    "StateRef",
    # Model structure
    "Variable",
    "CausalGraph",
    "StructuralEquation",
    "RegimeInfo",
    "PSCM",
    "FSCM",
    # C-components
    "CComponent",
    "CComponentDecomposition",
    # Data
    "MISSING",
    "COUNT_COLUMN",
    "Dataset",
    "BiasedDataset",
]
