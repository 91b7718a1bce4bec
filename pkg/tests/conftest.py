import os
import random

import pytest

from dkws.graph import build_graph

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

# Small two-keyword graph: v1..v9 -> 1..9, w1 -> 10, x1 -> 11, y1 -> 12, y2 -> 13, w2 -> 14
NAMES = {"v1": 1, "v2": 2, "v3": 3, "v4": 4, "v5": 5, "v6": 6, "v7": 7, "v8": 8, "v9": 9,
         "w1": 10, "x1": 11, "y1": 12, "y2": 13, "w2": 14}
SMALL_EDGES = [
    ("v2", "v4", 2), ("v2", "v3", 1), ("v3", "v5", 1),
    ("v1", "v6", 4), ("v1", "v7", 4),
    ("w1", "v8", 4), ("y1", "v7", 2), ("y2", "v3", 1),
    ("x1", "v9", 5), ("x1", "v5", 5),
]
SMALL_LABELS = {"v4": "a", "v6": "a", "v8": "a", "v9": "a", "v5": "b", "v7": "b"}


def vid(name):
    return NAMES[name]


def _build(extra=()):
    edges = [(NAMES[u], NAMES[v], w) for u, v, w in list(SMALL_EDGES) + list(extra)]
    labels = {NAMES[v]: [kw] for v, kw in SMALL_LABELS.items()}
    return build_graph(15, edges, labels, keyword_names=["a", "b"])


@pytest.fixture
def small_graph():
    return _build()


@pytest.fixture
def bridged_graph():
    """The small graph plus y1 -> w1, so y1 becomes a partial-match root reaching a through w1."""
    return _build([("y1", "w1", 1)])


@pytest.fixture
def three_fragment_paths():
    return {
        "edges": os.path.join(FIXTURES, "three_fragment.edges"),
        "labels": os.path.join(FIXTURES, "three_fragment.labels"),
        "part": os.path.join(FIXTURES, "three_fragment.part"),
    }


def random_graph(n, m_edges, num_keywords, seed, max_w=3, label_p=0.3):
    rng = random.Random(seed)
    edges = []
    for _ in range(m_edges):
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            edges.append((u, v, rng.randint(1, max_w)))
    labels = {}
    for v in range(n):
        if rng.random() < label_p:
            labels[v] = [f"k{rng.randrange(num_keywords)}"]
    return build_graph(n, edges, labels, keyword_names=[f"k{i}" for i in range(num_keywords)])
