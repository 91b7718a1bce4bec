"""Brute-force reference answers.

Plain binary-heap Dijkstra, deliberately independent of the search kernel.
"""

from __future__ import annotations

import heapq

from .graph import Graph, Query

MAX_ORACLE_VERTICES = 5000


class OracleTooLarge(ValueError):
    pass


def _guard(g: Graph):
    if g.n > MAX_ORACLE_VERTICES:
        raise OracleTooLarge(f"oracle limited to {MAX_ORACLE_VERTICES} vertices, graph has {g.n}")


def exact_keyword_dists(g: Graph, q: int, tau: float) -> dict:
    """dist(u, q) for every u with dist <= tau; others map to g.inf."""
    _guard(g)
    inf = g.inf
    best = {v: inf for v in range(g.n)}
    pq = []
    for v in g.keyword_index.get(q, ()):
        best[v] = 0.0
        pq.append((0.0, v))
    heapq.heapify(pq)
    while pq:
        d, v = heapq.heappop(pq)
        if d > best[v]:
            continue
        for s, w in g.in_adj[v]:
            nd = d + w
            if nd <= tau and nd < best[s]:
                best[s] = nd
                heapq.heappush(pq, (nd, s))
    return best


def forward_keyword_dist(g: Graph, u: int, q: int, tau: float) -> float:
    """Second method: plain forward Dijkstra from u until a vertex labeled q."""
    _guard(g)
    seen = {u: 0.0}
    pq = [(0.0, u)]
    while pq:
        d, v = heapq.heappop(pq)
        if d > tau:
            break
        if d > seen[v]:
            continue
        if q in g.labels[v]:
            return d
        for t, w in g.out_adj[v]:
            nd = d + w
            if nd < seen.get(t, float("inf")):
                seen[t] = nd
                heapq.heappush(pq, (nd, t))
    return g.inf


def exact_dist(g: Graph, u: int, v: int) -> float:
    _guard(g)
    if u == v:
        return 0.0
    seen = {u: 0.0}
    pq = [(0.0, u)]
    while pq:
        d, x = heapq.heappop(pq)
        if x == v:
            return d
        if d > seen[x]:
            continue
        for t, w in g.out_adj[x]:
            nd = d + w
            if nd < seen.get(t, float("inf")):
                seen[t] = nd
                heapq.heappush(pq, (nd, t))
    return g.inf


def all_dists_from(g: Graph, u: int) -> dict:
    _guard(g)
    seen = {u: 0.0}
    pq = [(0.0, u)]
    while pq:
        d, x = heapq.heappop(pq)
        if d > seen[x]:
            continue
        for t, w in g.out_adj[x]:
            nd = d + w
            if nd < seen.get(t, float("inf")):
                seen[t] = nd
                heapq.heappush(pq, (nd, t))
    return seen


def brute_top_k(g: Graph, query: Query) -> list:
    """All complete matches ranked by score then root id; the first k are returned."""
    _guard(g)
    per_kw = [exact_keyword_dists(g, q, query.tau) for q in query.keywords]
    scored = []
    for u in range(g.n):
        total = 0.0
        ok = True
        for dists in per_kw:
            d = dists[u]
            if d >= g.inf or d > query.tau:
                ok = False
                break
            total += d
        if ok:
            scored.append((total, u))
    scored.sort()
    return [(u, s) for s, u in scored[: query.k]]


def score_multiset(answer) -> list:
    return sorted(s for _, s in answer)
