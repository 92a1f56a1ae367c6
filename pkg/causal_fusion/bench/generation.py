"""
Random models and datasets for the fusion benchmark.

Graphs are Erdős–Rényi DAGs over ordered nodes. Parentless nodes with
children become exogenous; every other node is a Boolean endogenous
variable, and endogenous variables without an exogenous parent get a fresh
one. Exogenous states index deterministic relations between each child and
its endogenous parents, drawn without replacement and capped at
max_exo_card states.
"""

from __future__ import annotations

import logging
import math
from typing import Union

import networkx as nx
import numpy as np

from ..emcc.runner import initialize_exogenous
from ..errors import ModelError, SelectorBandError
from ..fusion.schemas import Selector, StudySpec
from ..scm.schemas import FSCM, PSCM, Dataset, StructuralEquation, Variable
from ..scm.tools.simulation import sample_endogenous
from .schemas import BenchConfig, Roles

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator]


def _rng(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# ============================================================================
# Models
# ============================================================================


def _er_layout(config: BenchConfig, rng: np.random.Generator) -> tuple[int, np.ndarray]:
    lo, hi = config.n_endogenous
    for _ in range(config.model_attempts):
        n_nodes = int(rng.integers(lo, hi + 5))
        adjacency = np.triu(rng.random((n_nodes, n_nodes)) < config.edge_probability, k=1)
        roots = ~adjacency.any(axis=0) & adjacency.any(axis=1)
        if lo <= n_nodes - int(roots.sum()) <= hi:
            return n_nodes, adjacency
    raise ModelError(f"No Erdős–Rényi graph with {lo}..{hi} endogenous nodes in {config.model_attempts} draws")


def _distinct_rows(rng: np.random.Generator, n_rows: int, n_bits: int) -> np.ndarray:
    """n_rows distinct random bit rows (requires n_rows <= 2**n_bits)."""
    seen: set[bytes] = set()
    rows = []
    while len(rows) < n_rows:
        row = rng.integers(0, 2, size=n_bits, dtype=np.int64)
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(n_rows, n_bits)


def sample_er_pscm(config: BenchConfig, seed: Seed = 0) -> PSCM:
    rng = _rng(seed)
    n_nodes, adjacency = _er_layout(config, rng)
    has_parent = adjacency.any(axis=0)
    roots = ~has_parent & adjacency.any(axis=1)

    endo_nodes = [i for i in range(n_nodes) if not roots[i]]
    exo_nodes = [i for i in range(n_nodes) if roots[i]]
    names = {node: f"V{k + 1}" for k, node in enumerate(endo_nodes)}
    names.update({node: f"U{k + 1}" for k, node in enumerate(exo_nodes)})

    endo_parents = {names[j]: [names[i] for i in range(n_nodes) if adjacency[i, j] and not roots[i]] for j in endo_nodes}
    exo_parents = {names[j]: [names[i] for i in range(n_nodes) if adjacency[i, j] and roots[i]] for j in endo_nodes}
    exogenous = [names[i] for i in exo_nodes]
    for v in (names[j] for j in endo_nodes):
        if not exo_parents[v]:
            fresh = f"U{len(exogenous) + 1}"
            exogenous.append(fresh)
            exo_parents[v].append(fresh)
    endogenous = [names[j] for j in endo_nodes]
    children = {u: [v for v in endogenous if u in exo_parents[v]] for u in exogenous}

    # Relations of a Boolean child with k endogenous parents: 2^(2^k)
    cards = {}
    for u in exogenous:
        bits = sum(2 ** len(endo_parents[v]) for v in children[u])
        cards[u] = config.max_exo_card if bits >= math.log2(config.max_exo_card) else 2**bits

    tables: dict[str, np.ndarray] = {}
    for u in exogenous:
        private = [v for v in children[u] if len(exo_parents[v]) == 1]
        if not private:
            continue
        widths = [2 ** len(endo_parents[v]) for v in private]
        n_distinct = min(cards[u], 2 ** min(sum(widths), 62))
        rows = _distinct_rows(rng, n_distinct, sum(widths))
        if n_distinct < cards[u]:
            extra = rng.integers(0, 2, size=(cards[u] - n_distinct, sum(widths)), dtype=np.int64)
            rows = np.vstack([rows, extra])
        offsets = np.cumsum([0, *widths])
        for k, v in enumerate(private):
            tables[v] = rows[:, offsets[k] : offsets[k + 1]].T.copy()
    for v in endogenous:
        if v not in tables:
            exo_size = math.prod(cards[u] for u in exo_parents[v])
            tables[v] = rng.integers(0, 2, size=(2 ** len(endo_parents[v]), exo_size), dtype=np.int64)
        table = tables[v]
        if np.all(table == table.flat[0]):
            flat = table.reshape(-1)
            flat[int(rng.integers(flat.size))] ^= 1

    variables = [Variable(name=v, cardinality=2, kind="endogenous") for v in endogenous]
    variables += [Variable(name=u, cardinality=cards[u], kind="exogenous") for u in exogenous]
    arcs = [(p, v) for v in endogenous for p in (*endo_parents[v], *exo_parents[v])]
    equations = [
        StructuralEquation(
            child=v,
            parent_order=(*endo_parents[v], *exo_parents[v]),
            table=tuple(tables[v].reshape(-1).tolist()),
        )
        for v in endogenous
    ]
    model = PSCM(variables=tuple(variables), arcs=tuple(arcs), equations=tuple(equations))
    logger.debug(f"Sampled model with {len(endogenous)} endogenous and {len(exogenous)} exogenous variables")
    return model


def sample_ground_truth(model: PSCM, seed: Seed = 0) -> FSCM:
    """Exogenous chances drawn uniformly on each simplex."""
    return FSCM(pscm=model, exo_pmfs=initialize_exogenous(model, _rng(seed)))


# ============================================================================
# Roles
# ============================================================================


def choose_roles(model: PSCM) -> Roles:
    """
    input: first endogenous variable (topologically) sharing an exogenous
    parent with another one; target: first leaf reachable from the input
    through a path with an interior node; covariate: the first such interior
    node.

    Raises:
        ModelError: when no such triple exists
    """
    order = model.endogenous_order
    graph = nx.DiGraph()
    graph.add_nodes_from(order)
    graph.add_edges_from((p, v) for v in order for p in model.endogenous_parents(v))

    confounded = [
        v for v in order if any(len([c for c in model.children(u) if c in graph]) > 1 for u in model.exogenous_parents(v))
    ]
    if not confounded:
        raise ModelError("No endogenous variable has an exogenous confounder")
    source = confounded[0]
    reachable = nx.descendants(graph, source)
    position = {v: i for i, v in enumerate(order)}
    for leaf in sorted(reachable, key=position.__getitem__):
        if graph.out_degree(leaf) != 0:
            continue
        interior = (reachable & nx.ancestors(graph, leaf)) - {source, leaf}
        if interior:
            covariate = min(interior, key=position.__getitem__)
            return Roles(input=source, covariate=covariate, target=leaf)
    raise ModelError(f"No leaf is reachable from {source} through an intermediate variable")


# ============================================================================
# Datasets
# ============================================================================


def _balanced_interventional(fscm: FSCM, variable: str, size: int, rng: np.random.Generator) -> Dataset:
    half = size // 2
    parts = [
        sample_endogenous(fscm, half, rng, {variable: 0}),
        sample_endogenous(fscm, size - half, rng, {variable: 1}),
    ]
    return Dataset.concat(parts, columns=fscm.pscm.endogenous)


def random_selector(model: PSCM, scope: tuple[str, ...], rng: np.random.Generator) -> Selector:
    size = math.prod(model.card(v) for v in scope)
    while True:
        table = rng.integers(0, 2, size=size)
        if table.any():
            return Selector.from_table(model, scope, table)


def sample_datasets(
    fscm: FSCM,
    roles: Roles,
    config: BenchConfig,
    size: int,
    seed: Seed = 0,
) -> tuple[StudySpec, StudySpec, StudySpec]:
    """
    D_O (observational), D_I (do(input), balanced) and D_IB (do(covariate),
    balanced, with a selector on input, covariate and target). All three
    hold `size` records, D_IB before selection.

    Raises:
        SelectorBandError: if no selector reaches the P(S=1) band
    """
    rng = _rng(seed)
    model = fscm.pscm
    observational = sample_endogenous(fscm, size, rng)
    interventional = _balanced_interventional(fscm, roles.input, size, rng)
    biased = _balanced_interventional(fscm, roles.covariate, size, rng)

    scope = tuple(v for v in model.endogenous if v in {roles.input, roles.covariate, roles.target})
    lo, hi = config.selector_band
    for attempt in range(config.selector_attempts):
        selector = random_selector(model, scope, rng)
        p_selected = float(biased.counts[selector.mask(biased)].sum()) / biased.total
        if lo <= p_selected <= hi:
            logger.debug(f"Selector accepted after {attempt + 1} draws, P(S=1)={p_selected:.3f}")
            break
    else:
        raise SelectorBandError(f"No selector reached P(S=1) in [{lo}, {hi}] in {config.selector_attempts} draws")

    return (
        StudySpec(name="D_O", dataset=observational),
        StudySpec(name="D_I", dataset=interventional, intervened_vars=(roles.input,)),
        StudySpec(name="D_IB", dataset=biased, intervened_vars=(roles.covariate,), selector=selector),
    )
