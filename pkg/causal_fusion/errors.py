"""
Exception hierarchy shared by all causal_fusion packages.
"""


class CausalFusionError(Exception):
    """Base class for every error raised by causal_fusion."""


class ModelError(CausalFusionError):
    """A model is structurally unusable (unknown variables, missing parents, ...)."""


class CardinalityOverflowError(CausalFusionError, ArithmeticError):
    """A canonical cardinality does not fit the platform integer."""


class FactorError(CausalFusionError):
    """Inconsistent factor scopes or cardinalities."""


class DataError(CausalFusionError):
    """Records inconsistent with a model or a study specification."""


class IncompatibilityError(CausalFusionError):
    """No EM run reached the global maximum of the likelihood."""


class UndefinedConditionalError(CausalFusionError):
    """A conditional query was asked on zero-probability evidence."""


class UndefinedMetricError(CausalFusionError):
    """A benchmark metric has a degenerate normaliser."""


class BudgetExceededError(CausalFusionError):
    """The exogenous configuration space is larger than the allowed budget."""


class SelectorBandError(CausalFusionError):
    """No selector reached the requested P(S=1) band."""
