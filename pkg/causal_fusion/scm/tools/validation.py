"""
Structural diagnostics for PSCMs.

validate_pscm never raises: it collects every violated invariant in a
ValidationReport instead of stopping at the first one.
"""

import math
from collections import Counter
from typing import Literal

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field

from ..schemas import PSCM

ViolationKind = Literal[
    "unknown_variable",
    "duplicate_variable",
    "cycle",
    "exogenous_not_root",
    "missing_exogenous_parent",
    "missing_equation",
    "extra_equation",
    "parent_mismatch",
    "table_size",
    "state_out_of_range",
    "non_surjective",
]


class Violation(BaseModel):
    kind: ViolationKind
    message: str
    variables: tuple[str, ...] = ()


class ValidationReport(BaseModel):
    """All invariant violations of a model; empty iff the model is valid."""

    violations: list[Violation] = Field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def add(self, kind: ViolationKind, message: str, *variables: str) -> None:
        self.violations.append(Violation(kind=kind, message=message, variables=variables))

    def summary(self) -> str:
        if self.is_valid:
            return "✅ Model is VALID!"
        lines = ["❌ Model validation FAILED!", "", "Errors found:"]
        lines += [f"  - {v.kind}: {v.message}" for v in self.violations]
        return "\n".join(lines)


def validate_pscm(model: PSCM) -> ValidationReport:
    report = ValidationReport()

    names = [v.name for v in model.variables]
    for name, count in Counter(names).items():
        if count > 1:
            report.add("duplicate_variable", f"{name} declared {count} times", name)
    known = set(names)

    arcs_ok = []
    for parent, child in model.arcs:
        unknown = [n for n in (parent, child) if n not in known]
        if unknown:
            report.add("unknown_variable", f"Arc {parent} -> {child} references {unknown}", *unknown)
        else:
            arcs_ok.append((parent, child))
    for equation in model.equations:
        unknown = [n for n in (equation.child, *equation.parent_order) if n not in known]
        if unknown:
            report.add("unknown_variable", f"Equation of {equation.child} references {unknown}", *unknown)
    if report.violations:
        # Lookups below need a consistent namespace
        return report

    graph = nx.DiGraph()
    graph.add_nodes_from(names)
    graph.add_edges_from(arcs_ok)
    if not nx.is_directed_acyclic_graph(graph):
        cycle = [edge[0] for edge in nx.find_cycle(graph)]
        report.add("cycle", f"Cycle {' -> '.join(cycle + cycle[:1])}", *cycle)

    kinds = {v.name: v.kind for v in model.variables}
    for exo in model.exogenous:
        incoming = [p for p in graph.predecessors(exo) if model.chance_parents.get(exo) != p]
        if incoming:
            report.add("exogenous_not_root", f"Exogenous {exo} has parents {incoming}", exo)

    equations = {}
    for equation in model.equations:
        if kinds[equation.child] != "endogenous" or equation.child in equations:
            report.add("extra_equation", f"Unexpected equation for {equation.child}", equation.child)
            continue
        equations[equation.child] = equation

    for name in model.endogenous:
        graph_parents = set(graph.predecessors(name))
        if not any(kinds[p] == "exogenous" for p in graph_parents):
            report.add("missing_exogenous_parent", f"Endogenous {name} has no exogenous parent", name)
        equation = equations.get(name)
        if equation is None:
            report.add("missing_equation", f"No structural equation for {name}", name)
            continue
        if set(equation.parent_order) != graph_parents or len(set(equation.parent_order)) != len(equation.parent_order):
            report.add(
                "parent_mismatch",
                f"Equation parents {list(equation.parent_order)} differ from graph parents {sorted(graph_parents)}",
                name,
            )
            continue
        size = math.prod(model.card(p) for p in equation.parent_order)
        if len(equation.table) != size:
            report.add("table_size", f"Table of {name} has {len(equation.table)} entries, expected {size}", name)
            continue
        table = np.asarray(equation.table)
        card = model.card(name)
        if np.any(table >= card):
            report.add("state_out_of_range", f"Table of {name} uses states outside 0..{card - 1}", name)
            continue
        unreachable = sorted(set(range(card)) - set(np.unique(table).tolist()))
        if unreachable:
            report.add("non_surjective", f"States {unreachable} of {name} are never produced", name)

    return report
