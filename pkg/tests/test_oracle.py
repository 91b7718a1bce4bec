import math

import pytest
from hypothesis import given, settings, strategies as st

from dkws.graph import Query, build_graph, make_query
from dkws.oracle import (MAX_ORACLE_VERTICES, OracleTooLarge, all_dists_from, brute_top_k,
                         exact_dist, exact_keyword_dists, forward_keyword_dist, score_multiset)

from conftest import random_graph, vid


def test_small_graph_top2(small_graph):
    q = make_query(small_graph, ["a", "b"], 10, 2)
    assert brute_top_k(small_graph, q) == [(vid("v2"), 4.0), (vid("v1"), 8.0)]


def test_bridged_graph_top2(bridged_graph):
    q = make_query(bridged_graph, ["a", "b"], 10, 2)
    assert brute_top_k(bridged_graph, q) == [(vid("v2"), 4.0), (vid("y1"), 7.0)]


def test_ties_break_by_root_id():
    g = build_graph(4, [(0, 2, 1), (1, 2, 1), (0, 3, 1), (1, 3, 1)], {2: ["a"], 3: ["b"]})
    assert brute_top_k(g, Query((0, 1), 5, 1)) == [(0, 2.0)]


def test_unreachable_and_tau():
    g = build_graph(3, [(0, 1, 3)], {1: ["a"]})
    d = exact_keyword_dists(g, 0, 3)
    assert d == {0: 3.0, 1: 0.0, 2: g.inf}
    assert exact_keyword_dists(g, 0, 2)[0] == g.inf
    assert forward_keyword_dist(g, 2, 0, 10) == g.inf
    assert exact_dist(g, 0, 1) == 3.0
    assert exact_dist(g, 1, 0) == g.inf


def test_edgeless_graph_matches_only_labeled_roots():
    g = build_graph(2, [], {0: ["a"]})
    assert brute_top_k(g, Query((0,), 1, 2)) == [(0, 0.0)]


def test_size_guard():
    g = build_graph(MAX_ORACLE_VERTICES + 1, [])
    with pytest.raises(OracleTooLarge):
        brute_top_k(g, Query((0,), 1, 1))


def test_score_multiset():
    assert score_multiset([(5, 2.0), (1, 1.0)]) == [1.0, 2.0]


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 30), st.integers(0, 90), st.integers(0, 10_000), st.sampled_from([1, 2, 4, 100]))
def test_two_methods_agree(n, m_edges, seed, tau):
    g = random_graph(n, m_edges, 3, seed=seed)
    for q in range(3):
        rev = exact_keyword_dists(g, q, tau)
        for u in range(n):
            assert rev[u] == forward_keyword_dist(g, u, q, tau)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 20), st.integers(0, 60), st.integers(0, 10_000))
def test_exact_dist_consistent(n, m_edges, seed):
    g = random_graph(n, m_edges, 2, seed=seed)
    for u in range(n):
        row = all_dists_from(g, u)
        for v in range(n):
            want = row.get(v, math.inf)
            got = exact_dist(g, u, v)
            assert got == (g.inf if want == math.inf else want)
