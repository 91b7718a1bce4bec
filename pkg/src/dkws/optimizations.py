"""Backtrack graphs, batched refinement propagation and frontier ordering."""

from __future__ import annotations

import heapq
import math

INF = math.inf


class BacktrackGraph:
    """Per-keyword reverse parent edges left behind by forward expansions."""

    def __init__(self, num_keywords: int):
        # rev[qi][child] = {parent: weight}
        self.rev = [dict() for _ in range(num_keywords)]

    def add_edge(self, qi: int, parent: int, child: int, w: float) -> None:
        row = self.rev[qi].setdefault(child, {})
        old = row.get(parent)
        if old is None or w < old:
            row[parent] = w

    def record_path(self, qi: int, parents: dict, v: int) -> int:
        """Insert the tree path ending at v; returns the number of edges walked."""
        steps = 0
        while v in parents:
            p, w = parents[v]
            self.add_edge(qi, p, v, w)
            v = p
            steps += 1
        return steps

    def edges(self, qi: int):
        for child, row in self.rev[qi].items():
            for parent, w in row.items():
                yield parent, child, w

    def vertices(self, qi: int) -> set:
        out = set()
        for parent, child, _ in self.edges(qi):
            out.add(parent)
            out.add(child)
        return out

    def predecessors(self, qi: int):
        rev = self.rev[qi]

        def preds(x):
            return rev.get(x, {}).items()
        return preds


def propagate_update_batch(preds, seeds: dict, slots: dict, tau: float) -> tuple:
    """One reverse Dijkstra from all refined vertices at once.

    ``preds(x)`` yields (parent, weight); ``seeds`` maps vertex -> new value;
    ``slots`` (vertex -> value) is lowered in place wherever a shorter
    distance is found. Returns (changed vertex -> value, pops).
    """
    best = {}
    pq = []
    for v, d in seeds.items():
        if d <= tau and d < best.get(v, INF):
            best[v] = d
            pq.append((d, v))
    heapq.heapify(pq)
    changed = {}
    pops = 0
    while pq:
        d, x = heapq.heappop(pq)
        if d > best[x]:
            continue
        pops += 1
        if d < slots.get(x, INF):
            slots[x] = d
            changed[x] = d
        for parent, w in preds(x):
            nd = d + w
            if nd <= tau and nd < best.get(parent, INF):
                best[parent] = nd
                heapq.heappush(pq, (nd, parent))
    return changed, pops


def propagate_naive(preds, seeds: dict, slots: dict, tau: float) -> dict:
    """Reference: propagate one refined vertex at a time."""
    changed = {}
    for v in sorted(seeds):
        c, _ = propagate_update_batch(preds, {v: seeds[v]}, slots, tau)
        changed.update(c)
    return changed


def order_frontier(roots, partial_scores: dict, enabled: bool = True) -> list:
    """Descending partial score when enabled, otherwise ascending vertex id."""
    if not enabled:
        return sorted(roots)
    return sorted(roots, key=lambda r: (-partial_scores.get(r, 0.0), r))
