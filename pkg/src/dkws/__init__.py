"""Distributed top-k keyword search over labeled weighted directed graphs."""

from .graph import Graph, GraphError, Query, build_graph, load_graph, make_query, search_origins
from .partition import Fragmentation, import_partition, partition_hash
from .runtime import VARIANTS, RunConfig, run_query
from .sketch import Sketches

__all__ = [
    "Graph", "GraphError", "Query", "build_graph", "load_graph", "make_query", "search_origins",
    "Fragmentation", "import_partition", "partition_hash",
    "VARIANTS", "RunConfig", "run_query", "Sketches",
]
