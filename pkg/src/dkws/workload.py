"""Seeded synthetic graphs and query sampling."""

from __future__ import annotations

import random

import numpy as np

from .graph import Graph, Query, build_graph


def _zipf_labels(n: int, num_keywords: int, rng: random.Random, s: float = 1.0):
    names = [f"k{i}" for i in range(num_keywords)]
    weights = [1.0 / (i + 1) ** s for i in range(num_keywords)]
    picks = rng.choices(range(num_keywords), weights=weights, k=n)
    return {v: [names[p]] for v, p in enumerate(picks)}, names


def erdos_renyi(n: int, avg_degree: float = 4.0, num_keywords: int = 20,
                seed: int = 0, weights=(1, 2)) -> Graph:
    """Directed G(n, M) with M = n * avg_degree / 2 edges (in+out degree ~ avg_degree)."""
    rng = random.Random(seed)
    target = int(round(n * avg_degree / 2))
    edges = []
    while len(edges) < target:
        u = rng.randrange(n)
        v = rng.randrange(n)
        if u != v:
            edges.append((u, v, rng.choice(weights)))
    labels, names = _zipf_labels(n, num_keywords, rng)
    return build_graph(n, edges, labels, names)


def preferential_attachment(n: int, edges_per_vertex: int = 2, num_keywords: int = 20,
                            seed: int = 0, weights=(1, 2)) -> Graph:
    """Each arriving vertex links to earlier vertices chosen proportionally to degree + 1."""
    rng = random.Random(seed)
    degree = [0] * n
    edges = []
    for v in range(1, n):
        pool = np.asarray(degree[:v], dtype=float) + 1.0
        chosen = set()
        want = min(edges_per_vertex, v)
        while len(chosen) < want:
            r = rng.random() * pool.sum()
            t = int(np.searchsorted(np.cumsum(pool), r, side="right"))
            chosen.add(min(t, v - 1))
        for t in sorted(chosen):
            a, b = (v, t) if rng.random() < 0.5 else (t, v)
            edges.append((a, b, rng.choice(weights)))
            degree[a] += 1
            degree[b] += 1
    labels, names = _zipf_labels(n, num_keywords, rng)
    return build_graph(n, edges, labels, names)


def make_graph(kind: str, n: int, seed: int = 0, num_keywords: int = 20) -> Graph:
    if kind == "er":
        return erdos_renyi(n, num_keywords=num_keywords, seed=seed)
    if kind == "pa":
        return preferential_attachment(n, num_keywords=num_keywords, seed=seed)
    raise ValueError(f"unknown graph kind {kind!r} (use 'er' or 'pa')")


def sample_queries(g: Graph, size: int, count: int, tau: float, k: int, seed: int = 0) -> list:
    """Uniform keyword draws (without replacement within a query) over non-empty keywords."""
    present = sorted(q for q, vs in g.keyword_index.items() if vs)
    if len(present) < size:
        raise ValueError(f"graph has {len(present)} keywords, query size {size} requested")
    rng = random.Random(seed)
    return [Query(tuple(rng.sample(present, size)), float(tau), int(k)) for _ in range(count)]
