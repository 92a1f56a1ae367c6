"""
Fusion and selection-bias experiments over batches of random models.

Each model slot draws its own generator from (seed, model index), so a
batch gives the same records whatever the number of worker processes.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

from ..config import BENCH_GAP_PER_RECORD
from ..counterfactual.evaluation import aggregate_range
from ..counterfactual.schemas import QuerySpec
from ..emcc.runner import emcc
from ..emcc.schemas import EmccConfig
from ..errors import CausalFusionError, ModelError, UndefinedMetricError
from ..fusion.merging import CHANCE_INDEX_VAR, learning_problem
from ..fusion.schemas import StudySpec
from ..fusion.selection import embed_selector, partition_by_selector
from ..scm.schemas import PSCM
from ..scm.tools.simulation import sample_endogenous
from .generation import choose_roles, random_selector, sample_datasets, sample_er_pscm, sample_ground_truth
from .metrics import normalized_bias_effect, relative_shrink
from .schemas import BenchConfig, BiasRecord, ChanceVariant, ExperimentRecord, Ordering, Roles

logger = logging.getLogger(__name__)

STAGES: dict[Ordering, tuple[tuple[str, ...], ...]] = {
    "biased_first": (("D_IB",), ("D_IB", "D_O"), ("D_IB", "D_O", "D_I")),
    "interventional_first": (("D_I",), ("D_I", "D_O"), ("D_I", "D_O", "D_IB")),
}


def stage_label(stage: Sequence[str]) -> str:
    return "+".join(name.removeprefix("D_") for name in stage)


def model_rng(config: BenchConfig, model_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([config.seed, model_id]))


def _emcc_config(config: BenchConfig, rng: np.random.Generator) -> EmccConfig:
    return EmccConfig(
        runs=config.runs,
        max_iterations=config.max_iterations,
        gap_per_record=BENCH_GAP_PER_RECORD,
        seed=int(rng.integers(2**63)),
        threads=1,
    )


def _sample_model(config: BenchConfig, rng: np.random.Generator) -> Optional[tuple[PSCM, Roles]]:
    for _ in range(config.model_attempts):
        model = sample_er_pscm(config, rng)
        try:
            return model, choose_roles(model)
        except ModelError:
            continue
    return None


def _pns(roles: Roles, context: Optional[dict] = None) -> QuerySpec:
    return QuerySpec(kind="PNS", cause=roles.input, effect=roles.target, context=context or {})


def stage_range(
    model: PSCM,
    studies: Sequence[StudySpec],
    roles: Roles,
    variant: ChanceVariant,
    query_group: Optional[str],
    emcc_config: EmccConfig,
) -> tuple[float, float]:
    """PNS(input -> target) range after fusing `studies`."""
    local = variant == "local" and len(studies) > 1
    if local:
        shifted = model.exogenous_parents(roles.covariate)
        studies = [study.model_copy(update={"local_chance_vars": shifted}) for study in studies]
    fit_model, data = learning_problem(model, studies)
    context = {CHANCE_INDEX_VAR: query_group} if local else {}
    result = aggregate_range(emcc(fit_model, data, config=emcc_config), _pns(roles, context), accept_near_best=True)
    return result.range


def run_model(config: BenchConfig, model_id: int) -> Optional[ExperimentRecord]:
    """Both orderings and every chance variant on one random model; None when the model is skipped."""
    rng = model_rng(config, model_id)
    sampled = _sample_model(config, rng)
    if sampled is None:
        logger.warning(f"Model {model_id}: no graph with usable roles in {config.model_attempts} draws, skipped")
        return None
    model, roles = sampled
    truth = sample_ground_truth(model, rng)
    lo, hi = config.dataset_size
    size = 2 * (int(rng.integers(lo, hi + 1)) // 2)
    emcc_config = _emcc_config(config, rng)
    try:
        studies = {study.name: study for study in sample_datasets(truth, roles, config, size, rng)}
        p_selected = studies["D_IB"].biased().p_selected
        ranges: dict[str, tuple[float, float]] = {}
        cache: dict[tuple, tuple[float, float]] = {}
        shrinks: dict[str, float] = {}
        for variant in config.variants:
            for ordering, stages in STAGES.items():
                group = stages[0][0]
                for stage in stages:
                    local = variant == "local" and len(stage) > 1
                    key = (variant if local else "global", frozenset(stage), group if local else None)
                    if key not in cache:
                        cache[key] = stage_range(
                            model, [studies[name] for name in stage], roles, variant, group, emcc_config
                        )
                    ranges[f"{variant}:{stage_label(stage)}"] = cache[key]
                base = ranges[f"{variant}:{stage_label(stages[0])}"]
                for stage in stages[1:]:
                    refined = ranges[f"{variant}:{stage_label(stage)}"]
                    try:
                        shrinks[f"{variant}:{stage_label(stage)}_vs_{stage_label(stages[0])}"] = relative_shrink(
                            base, refined
                        )
                    except UndefinedMetricError:
                        logger.debug(f"Model {model_id}: zero-width base range for {variant} {ordering}")
    except CausalFusionError as e:
        logger.warning(f"Model {model_id} skipped: {e}")
        return None
    logger.info(f"Model {model_id}: |V|={len(model.endogenous)}, roles {roles.input}/{roles.covariate}/{roles.target}")
    return ExperimentRecord(
        model_id=model_id,
        n_endogenous=len(model.endogenous),
        roles=roles,
        dataset_size=size,
        p_selected=p_selected,
        ranges=ranges,
        shrinks=shrinks,
    )


def run_bias_model(config: BenchConfig, model_id: int) -> Optional[BiasRecord]:
    """Biased against unbiased PNS range for one observational dataset and a random selector."""
    rng = model_rng(config, model_id)
    sampled = _sample_model(config, rng)
    if sampled is None:
        logger.warning(f"Model {model_id}: no graph with usable roles in {config.model_attempts} draws, skipped")
        return None
    model, roles = sampled
    truth = sample_ground_truth(model, rng)
    lo, hi = config.dataset_size
    data = sample_endogenous(truth, int(rng.integers(lo, hi + 1)), rng)
    scope = tuple(v for v in model.endogenous if v in {roles.input, roles.covariate, roles.target})
    selector = random_selector(model, scope, rng)
    emcc_config = _emcc_config(config, rng)
    try:
        biased = partition_by_selector(data, selector)
        if biased.n_selected == 0:
            logger.warning(f"Model {model_id}: the selector removed every record, skipped")
            return None
        unbiased_range = aggregate_range(emcc(model, data, config=emcc_config), _pns(roles), accept_near_best=True).range
        embedded = embed_selector(model, selector)
        biased_range = aggregate_range(emcc(embedded, biased, config=emcc_config), _pns(roles), accept_near_best=True).range
        lower_effect, upper_effect = normalized_bias_effect(biased_range, unbiased_range)
    except CausalFusionError as e:
        logger.warning(f"Model {model_id} skipped: {e}")
        return None
    return BiasRecord(
        model_id=model_id,
        p_selected=biased.p_selected,
        biased=biased_range,
        unbiased=unbiased_range,
        lower_effect=lower_effect,
        upper_effect=upper_effect,
    )


def _batch(config: BenchConfig, worker: Callable, progress: Optional[Callable] = None) -> list:
    ids = list(range(config.n_models))
    if config.threads > 1 and len(ids) > 1:
        with ProcessPoolExecutor(max_workers=min(config.threads, len(ids))) as pool:
            results = []
            for record in pool.map(worker, [config] * len(ids), ids):
                results.append(record)
                if progress is not None:
                    progress(len(results), len(ids))
    else:
        results = []
        for i in ids:
            results.append(worker(config, i))
            if progress is not None:
                progress(len(results), len(ids))
    records = sorted((r for r in results if r is not None), key=lambda r: r.model_id)
    logger.info(f"Batch finished: {len(records)} of {len(ids)} models kept")
    return records


def run_fusion_experiment(config: BenchConfig, progress: Optional[Callable[[int, int], None]] = None) -> list[ExperimentRecord]:
    return _batch(config, run_model, progress)


def run_bias_experiment(config: BenchConfig, progress: Optional[Callable[[int, int], None]] = None) -> list[BiasRecord]:
    return _batch(config, run_bias_model, progress)


def records_to_frame(records: Sequence[ExperimentRecord]) -> pd.DataFrame:
    """One row per model, one lower/upper column pair per stage and one column per shrink."""
    rows = []
    for record in records:
        row = {
            "model_id": record.model_id,
            "n_endogenous": record.n_endogenous,
            "input": record.roles.input,
            "covariate": record.roles.covariate,
            "target": record.roles.target,
            "dataset_size": record.dataset_size,
            "p_selected": record.p_selected,
        }
        for key, (lower, upper) in sorted(record.ranges.items()):
            row[f"{key}:lower"] = lower
            row[f"{key}:upper"] = upper
        for key, shrink in sorted(record.shrinks.items()):
            row[f"shrink:{key}"] = shrink
        rows.append(row)
    return pd.DataFrame(rows)


def bias_records_to_frame(records: Sequence[BiasRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "model_id": r.model_id,
                "p_selected": r.p_selected,
                "biased_lower": r.biased[0],
                "biased_upper": r.biased[1],
                "unbiased_lower": r.unbiased[0],
                "unbiased_upper": r.unbiased[1],
                "lower_effect": r.lower_effect,
                "upper_effect": r.upper_effect,
            }
            for r in records
        ]
    )
