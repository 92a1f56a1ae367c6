"""
Inference Package

Exact discrete inference over FSCM-induced Bayesian networks.
"""

from .factor import (
    Factor,
    multiply,
    marginalize,
    product,
    se_to_cpt,
)

from .elimination import (
    EliminationPlan,
    min_fill_order,
    plan_elimination,
    variable_elimination,
)

from .endogenous import (
    EndogenousBN,
    endogenous_bn_from_data,
    endogenous_joint,
    max_log_likelihood,
)

from .likelihood import (
    ZERO_EVIDENCE,
    LikelihoodReport,
    structural_factors,
    exogenous_factors,
    fscm_factors,
    record_probabilities,
    log_likelihood,
    log_likelihood_biased,
    posterior_exogenous,
    likelihood_report,
)

__all__ = [
    # Factor algebra
    "Factor",
    "multiply",
    "marginalize",
    "product",
    "se_to_cpt",
    # Variable elimination
    "EliminationPlan",
    "min_fill_order",
    "plan_elimination",
    "variable_elimination",
    # Endogenous network
    "EndogenousBN",
    "endogenous_bn_from_data",
    "endogenous_joint",
    "max_log_likelihood",
    # Likelihoods
    "ZERO_EVIDENCE",
    "LikelihoodReport",
    "structural_factors",
    "exogenous_factors",
    "fscm_factors",
    "record_probabilities",
    "log_likelihood",
    "log_likelihood_biased",
    "posterior_exogenous",
    "likelihood_report",
]
