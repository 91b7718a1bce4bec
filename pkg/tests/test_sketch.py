import math

import pytest
from hypothesis import given, settings, strategies as st

from dkws.oracle import all_dists_from, exact_keyword_dists
from dkws.partition import partition_hash
from dkws.sketch import (KpadsIndex, PadsIndex, Sketches, build_pads, est_dist, est_lower,
                         est_upper, filter_bottom_k, approx_factor, merge_far, merge_min,
                         pagerank, read_sketches, write_sketches)
from dkws.workload import erdos_renyi

from conftest import random_graph, vid


def _pads(n, out_rows=None, in_rows=None, k=4):
    outs = [[] for _ in range(n)]
    ins = [[] for _ in range(n)]
    for v, row in (out_rows or {}).items():
        outs[v] = sorted(row)
    for v, row in (in_rows or {}).items():
        ins[v] = sorted(row)
    return PadsIndex(outs, ins, k, [1.0 / n] * n, list(range(n)))


def test_pagerank_sums_to_one_and_is_deterministic():
    g = erdos_renyi(200, seed=3)
    pr = pagerank(g)
    assert abs(sum(pr) - 1.0) < 1e-6
    assert pr == pagerank(g)


def test_pagerank_rejects_bad_damping(small_graph):
    with pytest.raises(ValueError):
        pagerank(small_graph, damping=1.0)


def test_bridged_graph_out_sketch_of_y1_contains_w1(bridged_graph):
    pads = build_pads(bridged_graph, 4)
    assert pads.out_map(vid("y1")).get(vid("w1")) == 1.0


def test_keyword_sketch_min_merge_keeps_nearest():
    # three members of keyword a reach v13 at distances 5, 2, 3; the merged entry is the minimum
    v0, v7, v9, v13 = 0, 7, 9, 13
    rows = {v0: [(v13, 5.0)], v7: [(v13, 2.0), (4, 1.0)], v9: [(v13, 3.0)]}
    merged = dict(merge_min(rows[v] for v in (v0, v7, v9)))
    assert merged[v13] == 2.0


def test_est_dist_from_constructed_rows():
    # v9 -> v16 -> v7 gives 1 + 1; the route via v13 is longer
    v7, v9, v13, v16 = 7, 9, 13, 16
    pads = _pads(20, out_rows={v9: [(v16, 1.0), (v13, 2.0)]},
                 in_rows={v7: [(v16, 1.0), (v13, 3.0)]})
    assert est_dist(pads, v9, v7) == 2.0
    assert est_dist(pads, v9, v9) == 0.0
    assert est_dist(pads, v7, v9) is None


def test_upper_bound_from_rows():
    y1, w1 = vid("y1"), vid("w1")
    pads = _pads(15, out_rows={y1: [(w1, 1.0)]})
    kp = KpadsIndex({}, {0: [(w1, 4.0)]}, {}, {})
    assert est_upper(pads, kp, y1, 0) == 5.0


def test_lower_bound_from_rows():
    y2, w2 = vid("y2"), vid("w2")
    pads = _pads(15, out_rows={y2: [(w2, 10.0)]})
    kp = KpadsIndex({0: [(w2, 2.0)]}, {}, {0: [(w2, 2.0)]}, {})
    assert est_lower(pads, kp, y2, 0) == 8.0


def test_merge_far_needs_every_member():
    assert merge_far([[(1, 2.0), (2, 5.0)], [(1, 4.0)]]) == [(1, 4.0)]
    assert merge_far([]) == []


def test_filter_bottom_k_admission():
    merged = [(0, 5.0), (1, 1.0), (2, 2.0), (3, 9.0)]
    # rank order 0,1,2,3 with k=1: 0 kept; 1 kept (no kept entry <= 1); 2 dropped (1 <= 2)
    assert filter_bottom_k(merged, [0, 1, 2, 3], 1) == [(0, 5.0), (1, 1.0)]


def test_approx_factor():
    assert approx_factor(100, 1) is None
    assert approx_factor(16, 4) == 3
    assert approx_factor(17, 4) == 5


def test_persistence_roundtrip(tmp_path):
    g = erdos_renyi(80, seed=1)
    sk = Sketches.build(g, 3)
    fr = partition_hash(g, 4, seed=1)
    path = tmp_path / "s.idx"
    write_sketches(path, g, sk, fr)
    again = read_sketches(path, g)
    assert again.pads.out_sketch == sk.pads.out_sketch
    assert again.pads.in_sketch == sk.pads.in_sketch
    assert again.pads.pagerank == sk.pads.pagerank
    assert again.kpads.in_exact == sk.kpads.in_exact
    for u in range(0, 80, 7):
        for q in g.keyword_index:
            assert again.upper(u, q) == sk.upper(u, q)
            assert again.lower(u, q) == sk.lower(u, q)


def test_persistence_rejects_wrong_graph(tmp_path):
    g = erdos_renyi(30, seed=1)
    path = tmp_path / "s.idx"
    write_sketches(path, g, Sketches.build(g, 2))
    with pytest.raises(ValueError):
        read_sketches(path, erdos_renyi(31, seed=1))
    bad = tmp_path / "bad.idx"
    bad.write_text("hello\n")
    with pytest.raises(ValueError):
        read_sketches(bad, g)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(0, 90), st.integers(1, 5), st.integers(0, 10_000))
def test_bounds_sandwich_exact_distance(n, m_edges, k_param, seed):
    g = random_graph(n, m_edges, 3, seed=seed)
    sk = Sketches.build(g, k_param)
    for q in g.keyword_index:
        exact = exact_keyword_dists(g, q, math.inf)
        for u in range(n):
            d = exact[u]
            lo = sk.lower(u, q)
            up = sk.upper(u, q)
            if d >= g.inf:
                assert up is None
            else:
                assert lo <= d + 1e-9
                if up is not None:
                    assert up >= d - 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), st.integers(0, 70), st.integers(1, 4), st.integers(0, 10_000))
def test_vertex_sketches_are_exact_and_bounded(n, m_edges, k_param, seed):
    g = random_graph(n, m_edges, 2, seed=seed)
    pads = build_pads(g, k_param)
    for u in range(n):
        dists = all_dists_from(g, u)
        for c, d in pads.out_sketch[u]:
            assert dists[c] == d
        for v in range(n):
            est = est_dist(pads, u, v)
            if est is not None:
                assert est >= dists.get(v, math.inf) - 1e-9
        assert (u, 0.0) in pads.out_sketch[u]
        assert (u, 0.0) in pads.in_sketch[u]


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 30), st.integers(0, 90), st.integers(1, 4), st.integers(1, 5), st.integers(0, 10_000))
def test_border_lower_bound_is_sound(n, m_edges, k_param, m, seed):
    g = random_graph(n, m_edges, 2, seed=seed)
    sk = Sketches.build(g, k_param)
    fr = partition_hash(g, m, seed=seed)
    for f in fr.fragments:
        for u in f.local_vertices:
            lb = sk.lower_to_border(u, f)
            if not f.out_portals:
                assert lb == g.inf
                continue
            dists = all_dists_from(g, u)
            nearest = min((dists.get(p, math.inf) for p in f.out_portals), default=math.inf)
            if nearest < math.inf:
                assert lb <= nearest + 1e-9


def test_border_sketch_cases():
    from types import SimpleNamespace
    from dkws.sketch import build_bpads
    g = erdos_renyi(120, seed=8)
    pads = build_pads(g, 3)
    assert build_bpads(SimpleNamespace(out_portals=set()), pads).empty
    single = build_bpads(SimpleNamespace(out_portals={5}), pads)
    assert single.near == pads.out_sketch[5]
    fr = partition_hash(g, 4, seed=2)
    for f in fr.fragments:
        b = build_bpads(f, pads)
        near = dict(b.near)
        for p in f.out_portals:
            for c, d in pads.out_sketch[p]:
                assert near[c] <= d


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.tuples(st.integers(0, 15), st.integers(0, 9).map(float)),
                         max_size=6).map(lambda r: sorted(dict(r).items())), min_size=1, max_size=5))
def test_merge_idempotence(rows):
    once = merge_min(rows)
    assert merge_min([once, once]) == once
    assert merge_min([once] + rows) == once
    far = merge_far(rows)
    assert merge_far([far, far]) == far
    ranks = list(range(16))
    kept = filter_bottom_k(once, ranks, 2)
    assert filter_bottom_k(kept, ranks, 2) == kept


def test_index_merges_are_stable():
    from dkws.sketch import build_kpads
    g = erdos_renyi(150, seed=12)
    pads = build_pads(g, 4)
    a, b = build_kpads(pads, g), build_kpads(pads, g)
    assert a.out_sketch == b.out_sketch and a.in_exact == b.in_exact
    for q, members in g.keyword_index.items():
        assert merge_min([a.in_sketch[q]] + [pads.in_sketch[v] for v in members]) == a.in_sketch[q]
