"""PageRank-ranked all-distances sketches and distance bounds.

Each vertex keeps two sketches: ``out`` holds (center, dist(u, center)) and
``in`` holds (center, dist(center, u)). Keyword and fragment-border sketches
are center-wise merges of vertex sketches.

Lower bounds need care: the out-direction difference dist(u,w) - dist(q,w)
is only valid when dist(q,w) is at least the distance from u's nearest
keyword vertex to w, so it is computed against the *farthest* member
(``out_far``). The in-direction bound dist(w,q) - dist(w,u) needs dist(w,q)
exact; ``in_exact`` keeps only merged entries that survive the bottom-k
admission rule, which are exactly the entries of the sketch of a virtual
vertex standing for the whole keyword.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .graph import Graph

FORMAT_HEADER = "dkws-sketch 1"


def pagerank(g: Graph, damping: float = 0.85, tol: float = 1e-9,
             max_iters: int = 100) -> list:
    if not 0 < damping < 1:
        raise ValueError("damping must lie in (0, 1)")
    n = g.n
    if n == 0:
        return []
    rows, cols = [], []
    outdeg = np.zeros(n)
    for u, adj in enumerate(g.out_adj):
        outdeg[u] = len(adj)
        for v, _ in adj:
            rows.append(v)
            cols.append(u)
    inv = np.divide(1.0, outdeg, out=np.zeros(n), where=outdeg > 0)
    data = inv[cols] if cols else np.zeros(0)
    # column-stochastic transition matrix (parallel edges add up)
    trans = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    dangling = outdeg == 0
    x = np.full(n, 1.0 / n)
    for _ in range(max_iters):
        nxt = damping * (trans @ x + x[dangling].sum() / n) + (1.0 - damping) / n
        resid = np.abs(nxt - x).sum()
        x = nxt
        if resid < tol:
            break
    return x.tolist()


def _center_order(pr: list) -> list:
    return sorted(range(len(pr)), key=lambda v: (-pr[v], v))


def _pruned_dijkstra_fill(adj: list, order: list, k_param: int, n: int) -> list:
    """Pruned Dijkstra from each center in rank order.

    A vertex admits a center while fewer than k of its kept entries are at
    least as close; otherwise the traversal stops there.
    """
    store = [[] for _ in range(n)]
    for v in order:
        dist = {v: 0.0}
        heap = [(0.0, v)]
        done = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done or d > dist[u]:
                continue
            done.add(u)
            cnt = 0
            for _, du in store[u]:
                if du <= d:
                    cnt += 1
            if cnt >= k_param:
                continue          # u not admitted: prune the traversal here
            store[u].append((v, d))
            for t, w in adj[u]:
                nd = d + w
                if nd < dist.get(t, math.inf):
                    dist[t] = nd
                    heapq.heappush(heap, (nd, t))
    return [sorted(s) for s in store]


@dataclass
class PadsIndex:
    out_sketch: list
    in_sketch: list
    k_param: int
    pagerank: list
    rank: list = field(default_factory=list)   # rank[v] = position in center order
    _out_map: list = field(default=None, repr=False)
    _in_map: list = field(default=None, repr=False)

    def out_map(self, u: int) -> dict:
        if self._out_map is None:
            self._out_map = [dict(s) for s in self.out_sketch]
        return self._out_map[u]

    def in_map(self, u: int) -> dict:
        if self._in_map is None:
            self._in_map = [dict(s) for s in self.in_sketch]
        return self._in_map[u]

    def mean_size(self) -> float:
        n = len(self.out_sketch)
        if n == 0:
            return 0.0
        return sum(len(s) + len(t) for s, t in zip(self.out_sketch, self.in_sketch)) / (2 * n)


def build_pads(g: Graph, k_param: int = 4, pr: list | None = None) -> PadsIndex:
    if k_param < 1:
        raise ValueError("k_param must be at least 1")
    if pr is None:
        pr = pagerank(g)
    order = _center_order(pr)
    rank = [0] * g.n
    for i, v in enumerate(order):
        rank[v] = i
    # forward traversal from a center gives center->u distances (the "in" side)
    ins = _pruned_dijkstra_fill(g.out_adj, order, k_param, g.n)
    outs = _pruned_dijkstra_fill(g.in_adj, order, k_param, g.n)
    return PadsIndex(outs, ins, k_param, list(pr), rank)


def merge_min(sketches) -> list:
    best: dict = {}
    for sk in sketches:
        for c, d in sk:
            if d < best.get(c, math.inf):
                best[c] = d
    return sorted(best.items())


def merge_far(sketches) -> list:
    """Center-wise maximum, keeping only centers present in every sketch."""
    sketches = list(sketches)
    if not sketches:
        return []
    far = dict(sketches[0])
    for sk in sketches[1:]:
        cur = dict(sk)
        far = {c: max(d, cur[c]) for c, d in far.items() if c in cur}
        if not far:
            break
    return sorted(far.items())


def filter_bottom_k(merged: list, rank: list, k_param: int) -> list:
    """Keep the merged entries that pass the bottom-k admission rule in rank order."""
    kept = []
    for c, d in sorted(merged, key=lambda e: rank[e[0]]):
        cnt = 0
        for _, dk in kept:
            if dk <= d:
                cnt += 1
        if cnt < k_param:
            kept.append((c, d))
    return sorted(kept)


@dataclass
class KpadsIndex:
    out_sketch: dict          # keyword -> min-merged PADS^out rows (dist(q, center))
    in_sketch: dict           # keyword -> min-merged PADS^in rows (dist(center, q))
    out_far: dict             # keyword -> farthest-member PADS^out rows
    in_exact: dict            # keyword -> bottom-k filtered in_sketch (exact dist(center, q))
    _maps: dict = field(default_factory=dict, repr=False)

    def table(self, kind: str, q: int) -> dict:
        key = (kind, q)
        m = self._maps.get(key)
        if m is None:
            m = dict(getattr(self, kind).get(q, ()))
            self._maps[key] = m
        return m


def build_kpads(pads: PadsIndex, g: Graph) -> KpadsIndex:
    out_s, in_s, far, exact = {}, {}, {}, {}
    for q, members in sorted(g.keyword_index.items()):
        out_s[q] = merge_min(pads.out_sketch[v] for v in members)
        in_s[q] = merge_min(pads.in_sketch[v] for v in members)
        far[q] = merge_far(pads.out_sketch[v] for v in members)
        exact[q] = filter_bottom_k(in_s[q], pads.rank, pads.k_param)
    return KpadsIndex(out_s, in_s, far, exact)


@dataclass
class BorderSketch:
    near: list                # min merge of PADS^out over out-portals
    far: list                 # farthest-portal merge (sound lower bounds)
    in_exact: list            # bottom-k filtered min merge of PADS^in over out-portals
    empty: bool = False
    _near_map: dict = field(default=None, repr=False)
    _far_map: dict = field(default=None, repr=False)
    _in_map: dict = field(default=None, repr=False)

    def maps(self):
        if self._far_map is None:
            self._near_map = dict(self.near)
            self._far_map = dict(self.far)
            self._in_map = dict(self.in_exact)
        return self._far_map, self._in_map


def build_bpads(frag, pads: PadsIndex) -> BorderSketch:
    portals = sorted(frag.out_portals)
    if not portals:
        return BorderSketch([], [], [], empty=True)
    near = merge_min(pads.out_sketch[v] for v in portals)
    far = merge_far(pads.out_sketch[v] for v in portals)
    inward = filter_bottom_k(merge_min(pads.in_sketch[v] for v in portals),
                             pads.rank, pads.k_param)
    return BorderSketch(near, far, inward)


def _upper_via(out_u: dict, to_target: dict):
    best = None
    if len(out_u) > len(to_target):
        for c, d2 in to_target.items():
            d1 = out_u.get(c)
            if d1 is not None and (best is None or d1 + d2 < best):
                best = d1 + d2
    else:
        for c, d1 in out_u.items():
            d2 = to_target.get(c)
            if d2 is not None and (best is None or d1 + d2 < best):
                best = d1 + d2
    return best


def _lower_via(out_u: dict, far: dict, in_u: dict, exact: dict) -> float:
    best = 0.0
    for c, d2 in far.items():
        d1 = out_u.get(c)
        if d1 is not None and d1 - d2 > best:
            best = d1 - d2
    for c, d2 in exact.items():
        d1 = in_u.get(c)
        if d1 is not None and d2 - d1 > best:
            best = d2 - d1
    return best


def est_upper(pads: PadsIndex, kpads: KpadsIndex, u: int, q: int):
    return _upper_via(pads.out_map(u), kpads.table("in_sketch", q))


def est_lower(pads: PadsIndex, kpads: KpadsIndex, u: int, q: int) -> float:
    return _lower_via(pads.out_map(u), kpads.table("out_far", q),
                      pads.in_map(u), kpads.table("in_exact", q))


def est_lower_to_border(pads: PadsIndex, border: BorderSketch, u: int, inf: float) -> float:
    if border.empty:
        return inf
    far, inward = border.maps()
    return _lower_via(pads.out_map(u), far, pads.in_map(u), inward)


def est_dist(pads: PadsIndex, u: int, v: int):
    if u == v:
        return 0.0
    return _upper_via(pads.out_map(u), pads.in_map(v))


def approx_factor(n: int, k_param: int) -> float | None:
    """Stretch bound 2c-1 with c = ceil(ln n / ln k); None when k < 2."""
    if k_param < 2 or n < 2:
        return None
    c = math.ceil(math.log(n) / math.log(k_param))
    return 2 * c - 1


class Sketches:
    """Bundle of the built indexes with per-fragment border sketches."""

    def __init__(self, g: Graph, pads: PadsIndex, kpads: KpadsIndex | None = None):
        self.g = g
        self.pads = pads
        self.kpads = kpads if kpads is not None else build_kpads(pads, g)
        self._borders: dict = {}

    @classmethod
    def build(cls, g: Graph, k_param: int = 4) -> "Sketches":
        return cls(g, build_pads(g, k_param))

    def border(self, frag) -> BorderSketch:
        key = id(frag)
        b = self._borders.get(key)
        if b is None:
            b = build_bpads(frag, self.pads)
            self._borders[key] = (frag, b)
            return b
        return b[1]

    def upper(self, u: int, q: int):
        return est_upper(self.pads, self.kpads, u, q)

    def lower(self, u: int, q: int) -> float:
        return est_lower(self.pads, self.kpads, u, q)

    def lower_to_border(self, u: int, frag) -> float:
        return est_lower_to_border(self.pads, self.border(frag), u, self.g.inf)

    def dist(self, u: int, v: int):
        return est_dist(self.pads, u, v)


# ---------------------------------------------------------------- persistence

def _fmt_row(entries) -> str:
    return ",".join(f"{c}:{d!r}" for c, d in entries)


def _parse_row(text: str) -> list:
    if not text:
        return []
    out = []
    for item in text.split(","):
        c, d = item.split(":")
        out.append((int(c), float(d)))
    return out


def write_sketches(path, g: Graph, sk: Sketches, fragmentation=None) -> None:
    pads, kp = sk.pads, sk.kpads
    lines = [f"{FORMAT_HEADER} k={pads.k_param} n={g.n}", "[vertices]"]
    for v in range(g.n):
        lines.append(f"{v}|pr|{pads.pagerank[v]!r}")
        lines.append(f"{v}|out|{_fmt_row(pads.out_sketch[v])}")
        lines.append(f"{v}|in|{_fmt_row(pads.in_sketch[v])}")
    lines.append("[keywords]")
    for q in sorted(kp.out_sketch):
        name = g.keyword_names[q]
        for kind in ("out_sketch", "in_sketch", "out_far", "in_exact"):
            lines.append(f"{name}|{kind}|{_fmt_row(getattr(kp, kind)[q])}")
    if fragmentation is not None:
        lines.append("[borders]")
        for f in fragmentation.fragments:
            b = sk.border(f)
            if b.empty:
                lines.append(f"{f.fid}|empty|")
                continue
            for kind in ("near", "far", "in_exact"):
                lines.append(f"{f.fid}|{kind}|{_fmt_row(getattr(b, kind))}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sketches(path, g: Graph) -> Sketches:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(FORMAT_HEADER):
        raise ValueError("not a sketch file (bad header)")
    meta = dict(p.split("=") for p in lines[0].split()[2:])
    k_param, n = int(meta["k"]), int(meta["n"])
    if n != g.n:
        raise ValueError(f"sketch file is for {n} vertices, graph has {g.n}")
    outs, ins, pr = [[]] * n, [[]] * n, [0.0] * n
    kp = {"out_sketch": {}, "in_sketch": {}, "out_far": {}, "in_exact": {}}
    section = None
    for line in lines[1:]:
        if line.startswith("["):
            section = line
            continue
        key, kind, row = line.split("|", 2)
        if section == "[vertices]":
            v = int(key)
            if kind == "pr":
                pr[v] = float(row)
            elif kind == "out":
                outs[v] = _parse_row(row)
            else:
                ins[v] = _parse_row(row)
        elif section == "[keywords]":
            q = g.keyword_ids.get(key)
            if q is None:
                raise ValueError(f"sketch keyword {key!r} missing from graph")
            kp[kind][q] = _parse_row(row)
    order = _center_order(pr)
    rank = [0] * n
    for i, v in enumerate(order):
        rank[v] = i
    pads = PadsIndex(outs, ins, k_param, pr, rank)
    return Sketches(g, pads, KpadsIndex(**kp))
