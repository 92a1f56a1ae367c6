"""
Structure-preserving edits of PSCMs.
"""

from typing import Iterable

import numpy as np

from ...errors import ModelError
from ..schemas import PSCM, StructuralEquation, Variable


def remove_exogenous_states(model: PSCM, exogenous: str, states: Iterable[int]) -> PSCM:
    """
    Drop states of an exogenous variable and re-index the tables of its children.

    The result is generally non-canonical: children may lose some of the
    functions they could previously implement.
    """
    variable = model.variable(exogenous)
    if variable.kind != "exogenous":
        raise ModelError(f"{exogenous} is not exogenous")
    removed = sorted(set(int(s) for s in states))
    if any(not 0 <= s < variable.cardinality for s in removed):
        raise ModelError(f"States {removed} out of range for {exogenous}")
    kept = [s for s in range(variable.cardinality) if s not in removed]
    if not kept:
        raise ModelError(f"Cannot remove every state of {exogenous}")

    names = variable.states
    new_variable = Variable(
        name=exogenous,
        cardinality=len(kept),
        kind="exogenous",
        states=tuple(names[s] for s in kept) if names is not None else None,
    )
    variables = tuple(new_variable if v.name == exogenous else v for v in model.variables)

    equations = []
    for equation in model.equations:
        if exogenous not in equation.parent_order:
            equations.append(equation)
            continue
        axis = equation.parent_order.index(exogenous)
        table = np.take(model.se_array(equation.child), kept, axis=axis)
        equations.append(
            StructuralEquation(child=equation.child, parent_order=equation.parent_order, table=tuple(table.reshape(-1).tolist()))
        )
    return model.replace(variables=variables, equations=tuple(equations))
