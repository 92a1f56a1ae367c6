"""
Range comparison metrics and batch summaries.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..errors import UndefinedMetricError
from .schemas import BiasRecord, ExperimentRecord

Range = tuple[float, float]

# P(S=1) bins of the bias-effect summary
BIAS_BINS: tuple[tuple[float, float], ...] = ((0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0))


def relative_shrink(base: Range, refined: Range) -> float:
    """1 - width(refined) / width(base)."""
    width = base[1] - base[0]
    if width <= 0:
        raise UndefinedMetricError(f"Relative shrink of a zero-width base range {base}")
    return 1.0 - (refined[1] - refined[0]) / width


def normalized_bias_effect(biased: Range, unbiased: Range) -> tuple[float, float]:
    """
    Per endpoint, |biased - unbiased| over the same difference for the
    vacuous biased range [0, 1]. A zero normaliser gives 0 when the
    endpoints coincide and is undefined otherwise.
    """
    effects = []
    for biased_end, unbiased_end, vacuous in ((biased[0], unbiased[0], 0.0), (biased[1], unbiased[1], 1.0)):
        difference = abs(biased_end - unbiased_end)
        normaliser = abs(vacuous - unbiased_end)
        if normaliser == 0:
            if difference > 0:
                raise UndefinedMetricError(
                    f"Bias effect undefined: unbiased endpoint {unbiased_end} is already vacuous"
                )
            effects.append(0.0)
        else:
            effects.append(difference / normaliser)
    return effects[0], effects[1]


def quartiles(values: Sequence[float]) -> dict[str, float]:
    if not len(values):
        return {"n": 0}
    lower, median, upper = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return {"n": len(values), "lower_quartile": float(lower), "median": float(median), "upper_quartile": float(upper)}


def summarize_shrinks(records: Iterable[ExperimentRecord]) -> dict[str, dict[str, float]]:
    """Median and quartiles of every shrink key across the batch."""
    grouped: dict[str, list[float]] = {}
    for record in sorted(records, key=lambda r: r.model_id):
        for key, shrink in record.shrinks.items():
            grouped.setdefault(key, []).append(shrink)
    return {key: quartiles(values) for key, values in sorted(grouped.items())}


def summarize_bias(records: Iterable[BiasRecord], bins: Sequence[tuple[float, float]] = BIAS_BINS) -> list[dict]:
    """Bias-effect quartiles per P(S=1) bin (the last bin includes 1)."""
    records = sorted(records, key=lambda r: r.model_id)
    summary = []
    for k, (lo, hi) in enumerate(bins):
        last = k == len(bins) - 1
        members = [r for r in records if lo <= r.p_selected < hi or (last and r.p_selected == hi)]
        summary.append(
            {
                "bin": [lo, hi],
                "lower_effect": quartiles([r.lower_effect for r in members]),
                "upper_effect": quartiles([r.upper_effect for r in members]),
            }
        )
    return summary
