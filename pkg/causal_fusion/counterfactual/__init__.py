"""
Counterfactual Package

Surgery, multi-world networks, query evaluation on FSCMs, range aggregation
over compatible runs, and a brute-force oracle for small models.
"""

from .schemas import (
    QueryKind,
    WorldEvent,
    QuerySpec,
    LoweredQuery,
    QueryResult,
)

from .networks import (
    QUERY_NODE,
    world_name,
    surgery,
    multi_world_network,
    twin_network,
    augment_query_node,
)

from .evaluation import (
    query_context,
    CompiledQuery,
    evaluate_query,
    aggregate_range,
)

from .oracle import (
    OracleMethod,
    OracleBounds,
    brute_force_bounds,
)

__all__ = [
    # Enums
    "QueryKind",
    "OracleMethod",
    # Queries & results
    "WorldEvent",
    "QuerySpec",
    "LoweredQuery",
    "QueryResult",
    "OracleBounds",
    # Networks
    "QUERY_NODE",
    "world_name",
    "surgery",
    "multi_world_network",
    "twin_network",
    "augment_query_node",
    # Evaluation
    "query_context",
    "CompiledQuery",
    "evaluate_query",
    "aggregate_range",
    "brute_force_bounds",
]
