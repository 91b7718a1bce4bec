"""Labeled weighted directed graphs and keyword queries."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable


class GraphError(ValueError):
    """Raised for malformed graph input."""


@dataclass
class Graph:
    n: int
    out_adj: list
    in_adj: list
    labels: list
    keyword_index: dict
    keyword_names: list = field(default_factory=list)
    keyword_ids: dict = field(default_factory=dict)
    total_weight: float = 0.0

    @property
    def inf(self) -> float:
        # finite stand-in for "unreached"; larger than any path length
        return self.total_weight + 1.0

    @property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.out_adj)

    def edges(self):
        for u, adj in enumerate(self.out_adj):
            for v, w in adj:
                yield u, v, w

    def keyword_id(self, name: str) -> int | None:
        return self.keyword_ids.get(name)

    def keyword_name(self, kid: int) -> str:
        return self.keyword_names[kid]


def build_graph(n: int, edges: Iterable, labels: dict | None = None,
                keyword_names: list | None = None) -> Graph:
    """Build a graph from (u, v, w) triples and {vertex: iterable of keyword names}.

    Keyword names are interned in order of first appearance unless an explicit
    name list is supplied.
    """
    out_adj = [[] for _ in range(n)]
    in_adj = [[] for _ in range(n)]
    total = 0.0
    for u, v, w in edges:
        _check_edge(n, u, v, w)
        out_adj[u].append((v, float(w)))
        in_adj[v].append((u, float(w)))
        total += float(w)

    names = list(keyword_names or [])
    ids = {name: i for i, name in enumerate(names)}
    vertex_labels = [frozenset()] * n
    for v, kws in (labels or {}).items():
        if not 0 <= v < n:
            raise GraphError(f"label for unknown vertex {v}")
        kset = set()
        for name in kws:
            if name not in ids:
                ids[name] = len(names)
                names.append(name)
            kset.add(ids[name])
        vertex_labels[v] = frozenset(kset | vertex_labels[v])

    index: dict = {}
    for v in range(n):
        for q in vertex_labels[v]:
            index.setdefault(q, []).append(v)
    return Graph(n, out_adj, in_adj, vertex_labels, index, names, ids, total)


def _check_edge(n, u, v, w, lineno=None):
    where = f" (line {lineno})" if lineno is not None else ""
    if u < 0 or v < 0:
        raise GraphError(f"negative vertex id{where}")
    if u >= n or v >= n:
        raise GraphError(f"vertex id beyond declared range{where}")
    if u == v:
        raise GraphError(f"self-loop on vertex {u}{where}")
    if not w > 0:
        raise GraphError(f"non-positive weight {w}{where}")


def load_graph(edge_lines: Iterable[str], label_lines: Iterable[str] = (),
               n: int | None = None) -> Graph:
    """Parse an edge list ("u v w" per line) and a label list ("u kw1 kw2 ...")."""
    edges = []
    max_id = -1
    for lineno, line in enumerate(edge_lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise GraphError(f"expected 'u v w' on line {lineno}")
        try:
            u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise GraphError(f"malformed edge on line {lineno}") from None
        if u < 0 or v < 0:
            raise GraphError(f"negative vertex id (line {lineno})")
        if u == v:
            raise GraphError(f"self-loop on vertex {u} (line {lineno})")
        if not w > 0:
            raise GraphError(f"non-positive weight {w} (line {lineno})")
        edges.append((u, v, w))
        max_id = max(max_id, u, v)

    labels: dict = {}
    for lineno, line in enumerate(label_lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            v = int(parts[0])
        except ValueError:
            raise GraphError(f"malformed label line {lineno}") from None
        if v < 0 or (n is not None and v >= n):
            raise GraphError(f"label for unknown vertex {v} (line {lineno})")
        labels.setdefault(v, []).extend(parts[1:])
        max_id = max(max_id, v)

    if n is None:
        n = max_id + 1
    elif max_id >= n:
        raise GraphError(f"vertex id {max_id} beyond declared count {n}")
    return build_graph(n, edges, labels)


def load_graph_files(edge_path, label_path=None, n=None) -> Graph:
    with open(edge_path, encoding="utf-8") as ef:
        edge_lines = ef.readlines()
    label_lines = []
    if label_path:
        with open(label_path, encoding="utf-8") as lf:
            label_lines = lf.readlines()
    return load_graph(edge_lines, label_lines, n)


def write_graph_files(g: Graph, edge_path, label_path) -> None:
    with open(edge_path, "w", encoding="utf-8") as f:
        f.write(f"# {g.n} vertices\n")
        for u, v, w in g.edges():
            f.write(f"{u} {v} {w:g}\n")
    with open(label_path, "w", encoding="utf-8") as f:
        for v in range(g.n):
            if g.labels[v]:
                names = sorted(g.keyword_names[q] for q in g.labels[v])
                f.write(f"{v} {' '.join(names)}\n")


def search_origins(g: Graph, q: int) -> set:
    return set(g.keyword_index.get(q, ()))


@dataclass(frozen=True)
class Query:
    keywords: tuple
    tau: float
    k: int

    def __post_init__(self):
        if not self.keywords:
            raise ValueError("query needs at least one keyword")
        if len(set(self.keywords)) != len(self.keywords):
            raise ValueError("duplicate keyword in query")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")


def make_query(g: Graph, names, tau: float, k: int) -> Query:
    """Build a query from keyword names.

    Names absent from the graph get fresh ids past the interned range, so
    they have no origins and the query has no matches.
    """
    ids = []
    fresh = len(g.keyword_names)
    for name in names:
        kid = g.keyword_ids.get(name)
        if kid is None:
            kid = fresh
            fresh += 1
        ids.append(kid)
    return Query(tuple(ids), float(tau), int(k))
