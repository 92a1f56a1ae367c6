"""
Structural Causal Model Pydantic Schema

The structure follows: PSCM > (Variable, arcs, StructuralEquation) and
FSCM = PSCM + one PMF per exogenous variable.

CONVENTIONS:
- States are dense 0-based indices; `states` names live only in the I/O layer
- A structural equation table is flat and row-major over its parent order
  (first parent most significant)
- Variable names double as identifiers
- All models are immutable after construction
"""

from __future__ import annotations

import math
from functools import cached_property
from typing import Literal, Optional, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from ...config import PMF_TOLERANCE


# ============================================================================
# Enums as Literal Types
# ============================================================================

VariableKind = Literal["exogenous", "endogenous"]

StateRef = Union[int, str]


# ============================================================================
# Variables & Graph
# ============================================================================


class Variable(BaseModel):
    """A discrete variable with states 0..cardinality-1."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1, description="Unique variable name, also its identifier")
    cardinality: int = Field(..., ge=1, description="Number of states |Ω_X|")
    kind: VariableKind = Field(..., description="exogenous or endogenous")
    states: Optional[tuple[str, ...]] = Field(None, description="Display names of the states")

    @model_validator(mode="after")
    def _check_states(self) -> "Variable":
        if self.states is not None:
            if len(self.states) != self.cardinality:
                raise ValueError(
                    f"Variable {self.name} declares {len(self.states)} state names "
                    f"for cardinality {self.cardinality}"
                )
            if len(set(self.states)) != len(self.states):
                raise ValueError(f"Variable {self.name} has duplicate state names")
        return self

    @property
    def state_names(self) -> tuple[str, ...]:
        if self.states is not None:
            return self.states
        return tuple(str(i) for i in range(self.cardinality))

    def state_index(self, state: StateRef) -> int:
        """Resolve a state given by index or by name."""
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            index = int(state)
            if not 0 <= index < self.cardinality:
                raise ValueError(f"State {index} out of range for {self.name} (cardinality {self.cardinality})")
            return index
        names = self.state_names
        if state in names:
            return names.index(state)
        # Numeric strings are accepted for unnamed states
        if self.states is None and isinstance(state, str) and state.isdigit():
            return self.state_index(int(state))
        raise ValueError(f"Unknown state {state!r} for variable {self.name}; expected one of {list(names)}")

    def state_name(self, index: int) -> str:
        return self.state_names[index]


class CausalGraph(BaseModel):
    """Directed graph over variable names."""

    model_config = ConfigDict(frozen=True)

    nodes: tuple[str, ...]
    arcs: tuple[tuple[str, str], ...] = ()

    @cached_property
    def digraph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from(self.arcs)
        return graph

    def parents(self, node: str) -> tuple[str, ...]:
        return tuple(parent for parent, child in self.arcs if child == node)

    def children(self, node: str) -> tuple[str, ...]:
        return tuple(child for parent, child in self.arcs if parent == node)

    def is_acyclic(self) -> bool:
        return nx.is_directed_acyclic_graph(self.digraph)

    def topological_order(self) -> list[str]:
        """Topological order with ties broken by declaration order."""
        position = {node: i for i, node in enumerate(self.nodes)}
        return list(nx.lexicographical_topological_sort(self.digraph, key=position.__getitem__))


# ============================================================================
# Structural Equations
# ============================================================================


class StructuralEquation(BaseModel):
    """A deterministic map from the joint parent states to one child state."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    child: str = Field(..., description="Endogenous variable determined by this equation")
    parent_order: tuple[str, ...] = Field(..., alias="parents", description="Ordered parents Pa_V")
    table: tuple[int, ...] = Field(
        ..., alias="values", description="Child state for each parent configuration, row-major in parent order"
    )

    @field_validator("table")
    @classmethod
    def _non_negative(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(state < 0 for state in value):
            raise ValueError("Structural equation tables hold non-negative state indices")
        return value


# ============================================================================
# Auxiliary-model bookkeeping
# ============================================================================


class RegimeInfo(BaseModel):
    """
    Records how an auxiliary model (M' or M'') was derived from a base model,
    so that learnt exogenous chances can be mapped back onto the base model.
    """

    model_config = ConfigDict(frozen=True)

    base: "PSCM"
    index_var: str = Field("W", description="Index variable of the interventional regimes")
    index_exogenous: str = Field("U_W", description="Exogenous parent of the index variable")
    w_states: tuple[str, ...] = Field(..., description="State names of the index variable")
    interventions: tuple[dict[str, int], ...] = Field(
        ..., description="Intervened assignment per index state (empty for w_empty)"
    )
    study_of_state: tuple[int, ...] = Field(..., description="Position of the originating study per index state")
    chance_index_var: Optional[str] = Field(None, description="Coarsening variable W' when chances are local")
    chance_groups: tuple[str, ...] = Field((), description="State names of the coarsening variable")
    group_of_state: tuple[int, ...] = Field((), description="Coarsening state per index state, i(W)")


# ============================================================================
# Partially & Fully Specified Models
# ============================================================================


class PSCM(BaseModel):
    """
    Partially specified structural causal model: a graph plus one structural
    equation per endogenous variable, exogenous PMFs left unknown.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    variables: tuple[Variable, ...]
    arcs: tuple[tuple[str, str], ...] = ()
    equations: tuple[StructuralEquation, ...] = ()
    chance_parents: dict[str, str] = Field(
        default_factory=dict,
        alias="chanceParents",
        description="Exogenous variable -> endogenous coarsening variable indexing its chances",
    )
    selector: Optional[str] = Field(None, description="Name of the embedded selector variable, if any")
    regime: Optional[RegimeInfo] = Field(None, description="Derivation record of auxiliary models")

    def replace(self, **changes) -> "PSCM":
        """New model with some fields changed (model_copy would carry stale cached lookups)."""
        fields = {name: getattr(self, name) for name in type(self).model_fields}
        fields.update(changes)
        return PSCM(**fields)

    # ------------------------------------------------------------------
    # Lookups
    # ------------------------------------------------------------------

    @cached_property
    def variables_by_name(self) -> dict[str, Variable]:
        return {variable.name: variable for variable in self.variables}

    @cached_property
    def equations_by_child(self) -> dict[str, StructuralEquation]:
        return {equation.child: equation for equation in self.equations}

    def variable(self, name: str) -> Variable:
        try:
            return self.variables_by_name[name]
        except KeyError:
            raise KeyError(f"Unknown variable {name!r}") from None

    def has_variable(self, name: str) -> bool:
        return name in self.variables_by_name

    def card(self, name: str) -> int:
        return self.variable(name).cardinality

    def equation(self, name: str) -> StructuralEquation:
        try:
            return self.equations_by_child[name]
        except KeyError:
            raise KeyError(f"No structural equation for {name!r}") from None

    @cached_property
    def endogenous(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.kind == "endogenous")

    @cached_property
    def exogenous(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.kind == "exogenous")

    @cached_property
    def graph(self) -> CausalGraph:
        return CausalGraph(nodes=tuple(v.name for v in self.variables), arcs=self.arcs)

    def parents(self, name: str) -> tuple[str, ...]:
        """Parents in structural-equation order for endogenous variables."""
        if name in self.equations_by_child:
            return self.equations_by_child[name].parent_order
        return self.graph.parents(name)

    def endogenous_parents(self, name: str) -> tuple[str, ...]:
        return tuple(p for p in self.parents(name) if self.variable(p).kind == "endogenous")

    def exogenous_parents(self, name: str) -> tuple[str, ...]:
        return tuple(p for p in self.parents(name) if self.variable(p).kind == "exogenous")

    def children(self, name: str) -> tuple[str, ...]:
        return self.graph.children(name)

    @cached_property
    def topological_order(self) -> tuple[str, ...]:
        return tuple(self.graph.topological_order())

    @cached_property
    def endogenous_order(self) -> tuple[str, ...]:
        return tuple(v for v in self.topological_order if self.variable(v).kind == "endogenous")

    def se_array(self, name: str) -> np.ndarray:
        """Structural equation of `name` as an integer array shaped by its parent cardinalities."""
        return self.se_arrays[name]

    @cached_property
    def se_arrays(self) -> dict[str, np.ndarray]:
        arrays = {}
        for equation in self.equations:
            shape = tuple(self.card(p) for p in equation.parent_order)
            arrays[equation.child] = np.asarray(equation.table, dtype=np.int64).reshape(shape)
        return arrays

    def is_markovian(self) -> bool:
        return all(len(self.children(u)) == 1 for u in self.exogenous)

    def exogenous_space_size(self) -> int:
        return math.prod(self.card(u) for u in self.exogenous)

    def chance_contexts(self, name: str) -> int:
        """Number of PMFs held by an exogenous variable (one per coarsening state)."""
        parent = self.chance_parents.get(name)
        return self.card(parent) if parent is not None else 1


class FSCM(BaseModel):
    """A PSCM paired with one PMF per exogenous variable."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pscm: PSCM
    exo_pmfs: dict[str, np.ndarray] = Field(
        ..., description="θ_U per exogenous U; shape (|Ω_U|,) or (|Ω_W'|, |Ω_U|) for study-specific chances"
    )

    @field_validator("exo_pmfs", mode="before")
    @classmethod
    def _as_arrays(cls, value: dict) -> dict[str, np.ndarray]:
        return {name: np.array(pmf, dtype=float) for name, pmf in value.items()}

    @model_validator(mode="after")
    def _check_simplex(self) -> "FSCM":
        for name in self.pscm.exogenous:
            if name not in self.exo_pmfs:
                raise ValueError(f"Missing PMF for exogenous variable {name}")
        for name, pmf in self.exo_pmfs.items():
            if not self.pscm.has_variable(name) or self.pscm.variable(name).kind != "exogenous":
                raise ValueError(f"PMF given for {name}, which is not an exogenous variable")
            card = self.pscm.card(name)
            expected = (card,) if name not in self.pscm.chance_parents else (self.pscm.chance_contexts(name), card)
            if pmf.shape != expected:
                raise ValueError(f"PMF of {name} has shape {pmf.shape}, expected {expected}")
            if not np.all(np.isfinite(pmf)) or np.any(pmf < 0):
                raise ValueError(f"PMF of {name} has negative or non-finite entries")
            if np.any(np.abs(pmf.sum(axis=-1) - 1.0) > PMF_TOLERANCE):
                raise ValueError(f"PMF of {name} does not sum to one")
        return self

    @field_serializer("exo_pmfs")
    def _serialize_pmfs(self, value: dict[str, np.ndarray]) -> dict[str, list]:
        return {name: value[name].tolist() for name in sorted(value)}

    def theta(self, name: str) -> np.ndarray:
        return self.exo_pmfs[name]


# ============================================================================
# C-Components
# ============================================================================


class CComponent(BaseModel):
    """One element of the c-component partition."""

    model_config = ConfigDict(frozen=True)

    endogenous: tuple[str, ...] = Field(..., description="V^(c)")
    exogenous: tuple[str, ...] = Field(..., description="U^(c)")
    frontier: tuple[str, ...] = Field(..., description="W^(c): V^(c) plus its endogenous parents")
    predecessors: dict[str, tuple[str, ...]] = Field(..., description="W_V for each V in V^(c)")


class CComponentDecomposition(BaseModel):
    """Partition of a model into c-components."""

    model_config = ConfigDict(frozen=True)

    components: tuple[CComponent, ...]

    def component_of(self, name: str) -> CComponent:
        for component in self.components:
            if name in component.endogenous or name in component.exogenous:
                return component
        raise KeyError(f"{name!r} belongs to no component")

    def predecessors(self, name: str) -> tuple[str, ...]:
        return self.component_of(name).predecessors[name]


RegimeInfo.model_rebuild()
