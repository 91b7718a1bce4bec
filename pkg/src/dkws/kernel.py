"""Sequential search kernel: matches, the answer heap, backward and forward expansion."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

INF = math.inf


def score(slots, inf: float) -> float:
    """Sum of slot distances; any missing slot pushes the score to at least ``inf``."""
    total = 0.0
    missing = False
    for d in slots:
        if d >= inf:
            missing = True
        else:
            total += d
    return total + inf if missing else total


@dataclass
class Match:
    root: int
    dists: list
    leaves: list = field(default_factory=list)
    from_forward: list = field(default_factory=list)

    def complete(self, inf: float) -> bool:
        return all(d < inf for d in self.dists)

    def score(self, inf: float) -> float:
        return score(self.dists, inf)


class AnswerHeap:
    """At most k entries with distinct roots; ``bound`` is the worst retained score once full."""

    def __init__(self, k: int, inf: float):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.k = k
        self.inf = inf
        self.entries: dict = {}      # root -> (score, seq, approx)
        self._seq = 0

    def __len__(self):
        return len(self.entries)

    @property
    def bound(self) -> float:
        if len(self.entries) < self.k:
            return self.inf
        return max(s for s, _, _ in self.entries.values())

    def _worst(self):
        # latest-inserted among the maximal scores, so ties keep the earlier entry
        return max(self.entries.items(), key=lambda kv: (kv[1][0], kv[1][1]))[0]

    def offer(self, root: int, value: float, approx: bool = False) -> bool:
        """Insert or improve; returns True iff the bound changed."""
        before = self.bound
        cur = self.entries.get(root)
        if cur is not None:
            if value < cur[0] or (value == cur[0] and cur[2] and not approx):
                self._seq += 1
                self.entries[root] = (value, cur[1], approx)
            return self.bound != before
        if len(self.entries) < self.k:
            self._seq += 1
            self.entries[root] = (value, self._seq, approx)
        elif value < before:
            del self.entries[self._worst()]
            self._seq += 1
            self.entries[root] = (value, self._seq, approx)
        return self.bound != before

    def approximate_roots(self) -> list:
        return sorted(r for r, (_, _, a) in self.entries.items() if a)

    def resolve_approximate(self, exact_scores: dict) -> None:
        """Replace approximate entries by exact scores where known, drop the rest."""
        for r in self.approximate_roots():
            s, seq, _ = self.entries[r]
            exact = exact_scores.get(r)
            if exact is None:
                del self.entries[r]
            else:
                self.entries[r] = (exact, seq, False)

    def ranked(self) -> list:
        return sorted(((r, s) for r, (s, _, _) in self.entries.items()), key=lambda e: (e[1], e[0]))


class BackwardSearch:
    """Per-keyword label-correcting Dijkstra over reverse edges.

    ``in_adj[x]`` lists (source, weight) pairs that the caller may relax.
    Values may later be lowered from outside (portal messages) through
    :meth:`seed`, which re-opens the vertex.
    """

    def __init__(self, in_adj, num_keywords: int, tau: float, record_order: bool = False):
        self.in_adj = in_adj
        self.m = num_keywords
        self.tau = tau
        self.dist = [dict() for _ in range(num_keywords)]
        self.settled = [dict() for _ in range(num_keywords)]
        self.queues = [[] for _ in range(num_keywords)]
        self.order = [[] for _ in range(num_keywords)] if record_order else None
        self.pops = 0

    def seed(self, qi: int, v: int, d: float) -> bool:
        if d < self.dist[qi].get(v, INF):
            self.dist[qi][v] = d
            heapq.heappush(self.queues[qi], (d, v))
            return True
        return False

    def top(self, qi: int) -> float:
        q = self.queues[qi]
        dist, settled = self.dist[qi], self.settled[qi]
        while q:
            d, v = q[0]
            if d == dist[v] and settled.get(v, INF) > d:
                return d
            heapq.heappop(q)
        return INF

    def pop(self, qi: int, on_relax=None):
        """Settle the top of queue ``qi``; returns (vertex, dist)."""
        d, v = heapq.heappop(self.queues[qi])
        self.settled[qi][v] = d
        self.pops += 1
        if self.order is not None and v not in self.order[qi]:
            self.order[qi].append(v)
        dist = self.dist[qi]
        for s, w in self.in_adj[v]:
            nd = d + w
            if nd <= self.tau and nd < dist.get(s, INF):
                dist[s] = nd
                heapq.heappush(self.queues[qi], (nd, s))
                if on_relax is not None:
                    on_relax(s, qi, nd)
        return v, d

    def choose(self, bound: float, prune: bool, extra_lb=None):
        """Pick the keyword to pop next, or None when the stop rule holds.

        With pruning, keyword q may advance from frontier d only while
        d + sum of the other keywords' frontier lower bounds <= bound.
        An exhausted keyword contributes tau.
        """
        tops = [self.top(qi) for qi in range(self.m)]
        if not prune:
            best = None
            for qi, d in enumerate(tops):
                if d < INF and (best is None or d < tops[best]):
                    best = qi
            return best
        lbs = []
        for qi, d in enumerate(tops):
            lb = d if extra_lb is None else min(d, extra_lb(qi))
            lbs.append(self.tau if lb == INF else lb)
        total = sum(lbs)
        best = None
        for qi, d in enumerate(tops):
            if d == INF:
                continue
            if d + total - lbs[qi] <= bound and (best is None or d < tops[best]):
                best = qi
        return best


def backward_search(g, keywords, tau: float, k: int, prune: bool = True):
    """Whole-graph backward search; a root joins the answer once every keyword has settled it.

    Returns (search, heap).
    """
    m = len(keywords)
    bs = BackwardSearch(g.in_adj, m, tau, record_order=True)
    heap = AnswerHeap(k, g.inf)
    for qi, q in enumerate(keywords):
        for v in g.keyword_index.get(q, ()):
            bs.seed(qi, v, 0.0)
    while True:
        qi = bs.choose(heap.bound, prune)
        if qi is None:
            break
        v, _ = bs.pop(qi)
        if all(v in bs.settled[j] for j in range(m)):
            heap.offer(v, sum(bs.dist[j][v] for j in range(m)))
    return bs, heap


def forward_expand(out_adj, src: int, radius: dict, ub: dict, has_label, *,
                   reuse=None, is_leaf=None, on_portal=None, on_reuse=None):
    """Forward Dijkstra from ``src`` serving several keywords at once.

    ``radius`` and ``ub`` map keyword slot -> limit / best known distance.
    A keyword stays active until the frontier passes its radius or its
    upper bound. ``reuse(v, qi)`` may return a known distance from v to the
    keyword, ``is_leaf(v)`` marks vertices not to expand further (out-portals),
    and ``on_portal(v, qi, delta, budget, parents)`` is called at such leaves.
    Returns (ub, parents, pops).
    """
    ub = dict(ub)
    active = [qi for qi in radius if radius[qi] >= 0]
    seen = {src: 0.0}
    parents = {}
    pq = [(0.0, src)]
    pops = 0
    while pq and active:
        delta, v = heapq.heappop(pq)
        if delta > seen[v]:
            continue
        pops += 1
        leaf = is_leaf is not None and v != src and is_leaf(v)
        still = []
        for qi in active:
            if delta > radius[qi] or delta >= ub[qi]:
                continue
            if has_label(v, qi):
                ub[qi] = delta
                continue
            if reuse is not None and v != src:
                known = reuse(v, qi)
                if known is not None and delta + known < ub[qi]:
                    ub[qi] = delta + known
                    if on_reuse is not None:
                        on_reuse(v, qi, parents)
            if leaf and on_portal is not None:
                budget = min(radius[qi], ub[qi]) - delta
                if budget > 0:
                    on_portal(v, qi, delta, budget, parents)
            if delta < ub[qi]:
                still.append(qi)
        active = still
        if not active or leaf:
            continue
        for t, w in out_adj[v]:
            nd = delta + w
            if nd < seen.get(t, INF):
                seen[t] = nd
                parents[t] = (v, w)
                heapq.heappush(pq, (nd, t))
    return ub, parents, pops


def is_candidate(sketches, frag, u: int, q: int, budget: float, use_bpads: bool = True) -> bool:
    """False only if neither a local path nor a path through the fragment border fits in budget."""
    if sketches.lower(u, q) <= budget:
        return True
    if not use_bpads or frag is None:
        return True
    return sketches.lower_to_border(u, frag) <= budget


def approximate_score(dists, uppers, tau: float):
    """Score bound from exact-or-known slots, filling gaps with sketch upper bounds."""
    total = 0.0
    for d, up in zip(dists, uppers):
        best = d if up is None else min(d, up)
        if best > tau:
            return None
        total += best
    return total
