"""
Compatibility audit: how far an FSCM's endogenous conditionals are from the
data frequencies.
"""

import numpy as np

from ..inference.elimination import variable_elimination
from ..inference.endogenous import endogenous_bn_from_data
from ..inference.likelihood import fscm_factors
from ..scm.schemas import FSCM, Dataset
from ..scm.tools.canonical import c_components


def compatibility_gap(fscm: FSCM, data: Dataset) -> float:
    """
    Largest total-variation distance, over endogenous variables V and
    observed contexts w_V, between P_θ(V | w_V) and the empirical P(V | w_V).
    """
    model = fscm.pscm
    bn = endogenous_bn_from_data(model, data)
    decomposition = c_components(model)
    factors = fscm_factors(fscm)
    worst = 0.0
    for name in model.endogenous:
        context = decomposition.predecessors(name)
        joint = variable_elimination(factors, (name, *context)).values
        totals = joint.sum(axis=0, keepdims=True)
        modelled = joint / np.where(totals > 0, totals, 1.0)
        seen = ~bn.unseen[name]
        empirical = bn.conditional(name).values
        distance = 0.5 * np.abs(modelled - empirical).sum(axis=0)
        if np.any(seen):
            worst = max(worst, float(distance[seen].max()))
    return worst
