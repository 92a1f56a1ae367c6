"""
EM runs for compatible exogenous distributions.

Every run starts from a random point of the exogenous simplices, climbs the
likelihood with EM and is then checked against λ*: runs that reach it are
compatible FSCMs, the others are diagnosed (saddle, iteration cap, or
zero-probability records).
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Optional, Union

import numpy as np

from ..errors import DataError
from ..inference.endogenous import max_log_likelihood
from ..scm.schemas import FSCM, PSCM, BiasedDataset, Dataset
from .estep import CompiledData, Theta
from .schemas import CompatibleSet, EmccConfig, EmRunResult

logger = logging.getLogger(__name__)

RunHook = Callable[[EmRunResult], None]
Data = Union[Dataset, BiasedDataset]


# ============================================================================
# Initialisation & single steps
# ============================================================================


def run_rng(seed: int, run_index: int) -> np.random.Generator:
    """Generator of run `run_index`, independent of scheduling."""
    return np.random.default_rng(np.random.SeedSequence([seed, run_index]))


def initialize_exogenous(model: PSCM, seed: Union[int, np.random.Generator]) -> Theta:
    """Uniform draw on every exogenous simplex (one per chance context)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    theta = {}
    for name in model.exogenous:
        card = model.card(name)
        contexts = model.chance_contexts(name)
        draws = rng.dirichlet(np.ones(card), size=contexts)
        draws = np.maximum(draws, np.finfo(float).tiny)
        draws /= draws.sum(axis=1, keepdims=True)
        theta[name] = draws if name in model.chance_parents else draws[0]
    return theta


def as_dataset(model: PSCM, data: Data) -> Dataset:
    """Flatten biased data onto the model's selector column."""
    if isinstance(data, BiasedDataset):
        if model.selector is None:
            raise DataError("Biased data need a model with an embedded selector")
        return data.to_dataset(model.selector)
    return data


def em_step_unbiased(
    model: PSCM, theta: Theta, data: Dataset, *, compiled: Optional[CompiledData] = None
) -> Theta:
    """One EM step; pass `compiled` to reuse the compiled records across steps."""
    if compiled is None:
        compiled = CompiledData(model, data)
    return compiled.m_step(theta, compiled.e_step(theta).expected)


def em_step_biased(
    model: PSCM, theta: Theta, data: BiasedDataset, *, compiled: Optional[CompiledData] = None
) -> Theta:
    """
    One step on biased data: the unselected records contribute
    N_{S=0} · P(U | S=0) to the expected counts.
    """
    if compiled is None:
        compiled = CompiledData(model, as_dataset(model, data))
    return compiled.m_step(theta, compiled.e_step(theta).expected)


def _perturb(theta: Theta, scale: float, rng: np.random.Generator) -> Theta:
    jittered = {}
    for name, pmf in theta.items():
        noisy = pmf * (1.0 + rng.uniform(-scale, scale, size=pmf.shape))
        noisy = np.maximum(noisy, np.finfo(float).tiny)
        jittered[name] = noisy / noisy.sum(axis=-1, keepdims=True)
    return jittered


# ============================================================================
# Runs
# ============================================================================


def _ascend(
    compiled: CompiledData, theta: Theta, config: EmccConfig, budget: int, ll_star: float
) -> tuple[Theta, list[float], int, int, bool]:
    """
    EM until the likelihood is within ll_tolerance of λ* or the gain falls
    below stall_tolerance; returns the last θ whose likelihood is known.
    """
    trace: list[float] = []
    steps, skipped = 0, 0
    while True:
        result = compiled.e_step(theta)
        trace.append(result.log_likelihood)
        skipped = max(skipped, result.skipped)
        if ll_star - trace[-1] <= config.ll_tolerance:
            return theta, trace, steps, skipped, True
        if len(trace) > 1 and trace[-1] - trace[-2] <= config.stall_tolerance:
            return theta, trace, steps, skipped, True
        if steps >= budget:
            return theta, trace, steps, skipped, False
        theta = compiled.m_step(theta, result.expected)
        steps += 1


def run_em(
    model: PSCM,
    data: Data,
    init: Optional[Theta] = None,
    config: Optional[EmccConfig] = None,
    *,
    run_index: int = 0,
    compiled: Optional[CompiledData] = None,
    ll_star: Optional[float] = None,
) -> EmRunResult:
    config = config or EmccConfig()
    rng = run_rng(config.seed, run_index)
    if compiled is None:
        compiled = CompiledData(model, as_dataset(model, data))
    if ll_star is None:
        ll_star = max_log_likelihood(model, compiled.data)
    theta = init if init is not None else initialize_exogenous(model, rng)
    tolerance = config.ll_tolerance

    budget = config.max_iterations
    restarts = 0
    total_steps = 0
    while True:
        theta, trace, steps, skipped, converged = _ascend(compiled, theta, config, budget, ll_star)
        total_steps += steps
        budget -= steps
        gap = ll_star - trace[-1]
        if skipped:
            status = "incompatible_suspect"
        elif gap <= tolerance:
            status = "global_max"
        elif not converged:
            status = "max_iters"
        elif restarts < config.saddle_restarts and budget > 0:
            restarts += 1
            logger.debug(f"Run {run_index} stalled {gap:.3g} below λ*; perturbed restart {restarts}")
            theta = _perturb(theta, config.perturbation, rng)
            continue
        else:
            status = "saddle_suspect"
        break

    if skipped:
        logger.warning(f"Run {run_index}: {skipped} records have zero probability under the current chances")
    fscm = FSCM(pscm=model, exo_pmfs=theta)
    return EmRunResult(
        run_index=run_index,
        fscm=fscm,
        iterations=total_steps,
        ll_trace=trace,
        status=status,
        restarts=restarts,
        skipped_records=skipped,
    )


def _initial_theta(model: PSCM, config: EmccConfig, run_index: int) -> Optional[Theta]:
    if config.init == "custom":
        return {name: np.asarray(pmf, dtype=float) for name, pmf in config.initial_pmfs.items()}
    return None


def _run_chunk(model: PSCM, dataset: Dataset, config: EmccConfig, indices: list[int], ll_star: float) -> list[EmRunResult]:
    compiled = CompiledData(model, dataset)
    return [
        run_em(
            model,
            dataset,
            _initial_theta(model, config, i),
            config,
            run_index=i,
            compiled=compiled,
            ll_star=ll_star,
        )
        for i in indices
    ]


def emcc(
    model: PSCM,
    data: Data,
    hooks: Iterable[RunHook] = (),
    config: Optional[EmccConfig] = None,
) -> CompatibleSet:
    """
    r independent EM runs. Results are ordered by run index, so the set is
    identical whatever the number of worker processes.
    """
    config = config or EmccConfig()
    dataset = as_dataset(model, data)
    compiled = CompiledData(model, dataset)
    ll_star = max_log_likelihood(model, compiled.data)
    indices = list(range(config.runs))

    if config.threads > 1 and config.runs > 1:
        workers = min(config.threads, config.runs)
        chunks = [indices[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, model, dataset, config, chunk, ll_star) for chunk in chunks]
            results = [result for future in futures for result in future.result()]
    else:
        results = [
            run_em(model, dataset, _initial_theta(model, config, i), config, run_index=i, compiled=compiled, ll_star=ll_star)
            for i in indices
        ]
    results.sort(key=lambda r: r.run_index)

    for result in results:
        for hook in hooks:
            hook(result)

    collected = CompatibleSet(
        results=results,
        ll_star=ll_star,
        n_records=compiled.n_records,
        tolerance=config.ll_tolerance,
        near_best_tolerance=config.near_best_tolerance(compiled.n_records),
    )
    counts = collected.status_counts()
    logger.info(f"EMCC finished {config.runs} runs (λ*={ll_star:.4f}): {counts}")
    if not collected.compatible:
        logger.warning(
            "No EM run reached the maximum likelihood: the data may not be compatible with the model, "
            "which points to wrong modelling or to insufficient data"
        )
    return collected
