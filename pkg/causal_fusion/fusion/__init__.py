"""
Fusion Package

Reduces heterogeneous studies (observational, interventional, selection
biased) to learning on a single auxiliary model and merged dataset.
"""

from ..scm.schemas import BiasedDataset

from .schemas import (
    Selector,
    StudySpec,
    MergedDataset,
)

from .selection import (
    SELECTOR_VAR,
    partition_by_selector,
    unselected_count,
    embed_selector,
    selected_configurations,
    reduce_selection,
    incremental_removal_selectors,
)

from .merging import (
    INDEX_VAR,
    OBSERVATIONAL_STATE,
    CHANCE_INDEX_VAR,
    SHARED_GROUP,
    merge_studies,
    build_auxiliary,
    attach_local_chances,
    learning_problem,
    regime_structure,
    restrict_to_regime,
)

__all__ = [
    # Schemas
    "Selector",
    "StudySpec",
    "MergedDataset",
    "BiasedDataset",
    # Selection bias
    "SELECTOR_VAR",
    "partition_by_selector",
    "unselected_count",
    "embed_selector",
    "selected_configurations",
    "reduce_selection",
    "incremental_removal_selectors",
    # Merging & auxiliary models
    "INDEX_VAR",
    "OBSERVATIONAL_STATE",
    "CHANCE_INDEX_VAR",
    "SHARED_GROUP",
    "merge_studies",
    "build_auxiliary",
    "attach_local_chances",
    "learning_problem",
    "regime_structure",
    "restrict_to_regime",
]
