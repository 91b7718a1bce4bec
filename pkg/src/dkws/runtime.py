"""Superstep runtime: workers, coordinator, message routing and assembly.

Correctness outline (kept as code comments where it matters):

* Every slot value held anywhere is the length of a real path, so scores
  built from them are upper bounds and every heap bound is sound.
* Backward search keeps a per-keyword frontier. A slot at or below the
  global frontier of its keyword is exact ("certified"). Workers learn the
  other workers' frontiers at each barrier (``w_others``).
* Any top-k root ends with at least one certified backward slot, so it is
  a forward-search candidate; its uncertified slots are expanded with a
  radius no smaller than their true distance.
"""

from __future__ import annotations

import logging
import math
import os
import socket
import struct
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .graph import Graph, Query
from .kernel import AnswerHeap, BackwardSearch, Match, approximate_score, forward_expand, is_candidate
from .optimizations import BacktrackGraph, order_frontier, propagate_update_batch
from .partition import Fragmentation

INF = math.inf
VARIANTS = ("baseline", "bf", "pads", "np", "pine")

KIND_BACKWARD = 1
KIND_REPLY = 2
KIND_REQUEST = 3
KIND_NOTIFY = 4
KIND_PUSH = 5

HEADER = struct.Struct("<BI")
TUPLE = struct.Struct("<QId")

log = logging.getLogger("dkws")


class RoutingError(RuntimeError):
    pass


# ------------------------------------------------------------------ wire codec

def frame_size(n_tuples: int) -> int:
    return HEADER.size + TUPLE.size * n_tuples


def encode_frame(kind: int, tuples) -> bytes:
    payload = b"".join(TUPLE.pack(v, q, d) for v, q, d in tuples)
    return HEADER.pack(kind, len(payload)) + payload


def decode_frame(buf: bytes, offset: int = 0):
    """Returns (kind, tuples, next offset)."""
    kind, length = HEADER.unpack_from(buf, offset)
    start = offset + HEADER.size
    if length % TUPLE.size or start + length > len(buf):
        raise ValueError("truncated or misaligned frame")
    tuples = [TUPLE.unpack_from(buf, start + i) for i in range(0, length, TUPLE.size)]
    return kind, tuples, start + length


def _recv_exact(sock, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(n)
        if not chunk:
            raise ConnectionError("socket closed mid-frame")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def send_frame(sock, kind: int, tuples) -> int:
    data = encode_frame(kind, tuples)
    sock.sendall(data)
    return len(data)


def recv_frame(sock):
    kind, length = HEADER.unpack(_recv_exact(sock, HEADER.size))
    payload = _recv_exact(sock, length)
    _, tuples, _ = decode_frame(HEADER.pack(kind, length) + payload)
    return kind, tuples


class SocketTransport:
    """Carries each barrier's frames through a local socket pair per receiver."""

    def __init__(self, m: int):
        self.pairs = [socket.socketpair() for _ in range(m)]

    def carry(self, dest: int, kind: int, tuples):
        tx, rx = self.pairs[dest - 1]
        send_frame(tx, kind, tuples)
        return recv_frame(rx)

    def close(self):
        for a, b in self.pairs:
            a.close()
            b.close()


# ------------------------------------------------------------------ configuration

@dataclass
class RunConfig:
    np_threshold: int = 2
    deterministic: bool = False
    opt_backtrack: bool | None = None
    opt_bpads: bool | None = None
    opt_order: bool | None = None
    selector: str | None = None          # "free" or "forced"; default by variant
    scheduler: str = "round-robin"       # or "threads"
    transport: str = "memory"            # or "socket"
    audit: bool = False
    max_supersteps: int = 1_000_000


@dataclass
class Features:
    prune: bool
    sketch: bool
    notify: bool
    free_selector: bool
    reuse: bool
    backtrack: bool
    bpads: bool
    order: bool


def features_for(variant: str, config: RunConfig, m: int) -> Features:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    level = VARIANTS.index(variant)
    default_opt = level >= 2

    def pick(flag):
        return default_opt if flag is None else bool(flag)

    selector = config.selector or ("free" if variant == "pine" else "forced")
    if selector not in ("free", "forced"):
        raise ValueError(f"unknown selector mode {selector!r}")
    sketch = level >= 2
    return Features(
        prune=level >= 1,
        sketch=sketch,
        notify=level >= 3 and m > 1,
        free_selector=selector == "free",
        reuse=level >= 1,
        backtrack=pick(config.opt_backtrack),
        bpads=pick(config.opt_bpads) and sketch,
        order=pick(config.opt_order),
    )


@dataclass
class Metrics:
    elapsed_ms: float = 0.0
    supersteps: int = 0
    msg_count: int = 0
    msg_bytes: int = 0
    visited_nodes: int = 0
    visited_per_worker: list = field(default_factory=list)
    notifications: int = 0
    pushes: int = 0
    audit_events: int = 0
    audit_violations: int = 0

    def count_frame(self, n_tuples: int):
        self.msg_count += 1
        self.msg_bytes += frame_size(n_tuples)


@dataclass
class QueryResult:
    answers: list                 # [(root, score)] ascending
    matches: list                 # [Match]
    metrics: Metrics


class Audit:
    """Monotonicity bookkeeping over one query's event trace."""

    def __init__(self):
        self.slots: dict = {}
        self.bounds: dict = {}
        self.global_bound = INF
        self.events = 0
        self.violations = 0
        self.lock = threading.Lock()

    def slot(self, wid, v, qi, value):
        with self.lock:
            self.events += 1
            key = (wid, v, qi)
            if value > self.slots.get(key, INF):
                self.violations += 1
            self.slots[key] = value

    def local_bound(self, wid, value):
        with self.lock:
            self.events += 1
            if value > self.bounds.get(wid, INF):
                self.violations += 1
            self.bounds[wid] = value

    def coordinator(self, s, table):
        with self.lock:
            self.events += 1
            if s > self.global_bound or s != min(table):
                self.violations += 1
            self.global_bound = s


# ------------------------------------------------------------------ selector

def staleness_indicators(backward_buf, request_buf, reply_buf, bound: float, tau: float):
    """Average remaining expansion distance per buffered vertex, per direction."""
    per_vertex: dict = {}
    for v, _qi, d in backward_buf:
        per_vertex.setdefault(v, []).append(max(0.0, min(bound - d, tau)))
    si_b = INF if not per_vertex else sum(sum(x) for x in per_vertex.values()) / len(per_vertex)
    fwd: dict = {}
    for _src, v, _qi, budget in request_buf:
        fwd.setdefault(v, []).append(min(budget, tau))
    for v, _qi, _d in reply_buf:
        fwd.setdefault(v, []).append(0.0)
    si_f = INF if not fwd else sum(sum(x) for x in fwd.values()) / len(fwd)
    return si_b, si_f


def select_subtask(si_b: float, si_f: float) -> str:
    return "bkws" if si_b <= si_f else "fkws"


# ------------------------------------------------------------------ coordinator

class Coordinator:
    def __init__(self, m: int, threshold: int, inf: float, deterministic: bool,
                 metrics: Metrics, audit: Audit | None = None):
        self.m = m
        self.threshold = threshold
        self.table = [inf] * m
        self.bound = inf
        self.counters = [0] * m
        self.last_pushed = [inf] * m
        self.deterministic = deterministic
        self.metrics = metrics
        self.audit = audit
        self.workers: list = []
        self.lock = threading.Lock()

    def notify(self, wid: int, s: float) -> None:
        """Worker ``wid`` (1-based) reports its local bound."""
        with self.lock:
            self.metrics.count_frame(1)
            self.metrics.notifications += 1
            i = wid - 1
            self.counters[i] += 1
            if s < self.table[i]:
                self.table[i] = s
                self.bound = min(self.bound, s)
            if self.audit is not None:
                self.audit.coordinator(self.bound, self.table)
            if not self.deterministic:
                self._push_round()

    def barrier(self) -> None:
        with self.lock:
            if self.deterministic:
                self._push_round()

    def _push_round(self):
        top = max(self.counters)
        for i in range(self.m):
            if (top - self.counters[i] > self.threshold and self.table[i] > self.bound
                    and self.bound < self.last_pushed[i]):
                self.last_pushed[i] = self.bound
                self.metrics.count_frame(1)
                self.metrics.pushes += 1
                if i < len(self.workers):
                    self.workers[i].receive_push(self.bound)


# ------------------------------------------------------------------ worker

class Worker:
    def __init__(self, frag, g: Graph, query: Query, feats: Features, sketches,
                 coordinator: Coordinator, audit: Audit | None):
        self.wid = frag.fid
        self.frag = frag
        self.g = g
        self.query = query
        self.kw = query.keywords
        self.m = len(query.keywords)
        self.tau = query.tau
        self.feats = feats
        self.sketches = sketches
        self.coord = coordinator
        self.audit = audit
        self.bs = BackwardSearch(frag.in_adj, self.m, self.tau)
        self.fwd = [dict() for _ in range(self.m)]
        self.heap = AnswerHeap(query.k, g.inf)
        self.pushed = INF
        self.last_notified = g.inf
        self.bbuf: list = []            # (vertex, qi, dist)
        self.req_buf: list = []         # (src fid, vertex, qi, budget)
        self.rep_buf: list = []         # (vertex, qi, dist)
        self.outbox: dict = {}          # (dest, kind) -> {(vertex, qi): value}
        self.outmin = [INF] * self.m
        self.w_others = [INF] * self.m
        self.pending: set = set()
        self.touched: set = set()
        self.expanded: set = set()
        self.approx_tried: set = set()
        self.req_budget: dict = {}
        self.requesters: dict = {}
        self.replied: dict = {}
        self.sent_req: dict = {}
        self.dirty: set = set()
        self.bt = BacktrackGraph(self.m) if feats.backtrack else None
        self.visited = 0
        self._lower_memo: dict = {}

    # ---- slot access
    def has_label(self, v, qi):
        return self.kw[qi] in self.g.labels[v]

    def slot(self, v, qi):
        b = self.bs.dist[qi].get(v, INF)
        f = self.fwd[qi].get(v, INF)
        return b if b < f else f

    def bound(self) -> float:
        if not self.feats.prune:
            return INF
        b = self.heap.bound
        return b if b < self.pushed else self.pushed

    def frontier(self, qi) -> float:
        t = self.bs.top(qi)
        o = self.outmin[qi]
        w = self.w_others[qi]
        return min(t, o, w)

    def _extra_lb(self, qi):
        o, w = self.outmin[qi], self.w_others[qi]
        return o if o < w else w

    def certified(self, v, qi) -> bool:
        return self.slot(v, qi) <= self.frontier(qi)

    def sketch_lower(self, v, qi) -> float:
        key = (v, qi)
        est = self._lower_memo.get(key)
        if est is None:
            est = self._lower_memo[key] = self.sketches.lower(v, self.kw[qi])
        return est

    # ---- events
    def receive_push(self, s: float):
        if s < self.pushed:
            self.pushed = s
            if self.audit is not None:
                self.audit.local_bound(self.wid, self.bound())

    def _changed(self, v, qi, backward: bool):
        if self.audit is not None:
            self.audit.slot(self.wid, v, qi, self.slot(v, qi))
        if not self.frag.is_local[v]:
            return
        if backward and v not in self.touched:
            self.touched.add(v)
            self.pending.add(v)
        if (v, qi) in self.requesters:
            self.dirty.add((v, qi))
        self._offer(v)

    def _offer(self, v, value=None, approx=False):
        if value is None:
            total = 0.0
            for qi in range(self.m):
                d = self.slot(v, qi)
                if d > self.tau:
                    return
                total += d
            value = total
        if self.heap.offer(v, value, approx):
            if self.audit is not None:
                self.audit.local_bound(self.wid, self.bound())
            if self.feats.notify and self.heap.bound < self.last_notified:
                self.last_notified = self.heap.bound
                self.coord.notify(self.wid, self.heap.bound)

    def _on_relax(self, s, qi, nd):
        self._changed(s, qi, True)

    def _send(self, dest, kind, v, qi, value):
        box = self.outbox.setdefault((dest, kind), {})
        key = (v, qi)
        old = box.get(key)
        if old is None or (value > old if kind == KIND_REQUEST else value < old):
            box[key] = value

    # ---- backward search
    def seed_origins(self):
        frag = self.frag
        for qi, q in enumerate(self.kw):
            for v in self.g.keyword_index.get(q, ()):
                if frag.is_local[v] or frag.is_out_portal[v]:
                    if self.bs.seed(qi, v, 0.0):
                        self._changed(v, qi, True)

    def run_bkws(self):
        for v, qi, d in self.bbuf:
            if self.bs.seed(qi, v, d):
                self._changed(v, qi, True)
        self.bbuf = []
        frag = self.frag
        prune = self.feats.prune
        while True:
            qi = self.bs.choose(self.bound(), prune, self._extra_lb)
            if qi is None:
                break
            v, d = self.bs.pop(qi, self._on_relax)
            self.visited += 1
            if frag.is_in_portal[v] and not self.has_label(v, qi):
                # labeled portals are seeded at 0 on every holder already
                for dest in sorted(frag.portal_targets[v]):
                    self._send(dest, KIND_BACKWARD, v, qi, d)
                if d < self.outmin[qi]:
                    self.outmin[qi] = d

    def bkws_runnable(self) -> bool:
        return self.bs.choose(self.bound(), self.feats.prune, self._extra_lb) is not None

    # ---- forward search
    def _expand(self, src, radius: dict):
        feats = self.feats
        frag = self.frag
        ub = {qi: (self.slot(src, qi) if feats.reuse else INF) for qi in radius}
        bt = self.bt

        def on_portal(v, qi, delta, budget, parents):
            key = (v, qi)
            if budget > self.sent_req.get(key, 0.0):
                self.sent_req[key] = budget
                owner = next(iter(frag.portal_targets[v]))
                self._send(owner, KIND_REQUEST, v, qi, budget)
            if bt is not None:
                bt.record_path(qi, parents, v)

        def on_reuse(v, qi, parents):
            if bt is not None:
                bt.record_path(qi, parents, v)

        def reuse(v, qi):
            d = self.slot(v, qi)
            return d if d <= self.tau else None

        ub, _, pops = forward_expand(
            frag.out_adj, src, radius, ub, self.has_label,
            reuse=reuse if feats.reuse else None,
            is_leaf=lambda v: frag.is_out_portal[v] == 1,
            on_portal=on_portal, on_reuse=on_reuse)
        self.visited += pops
        for qi, val in ub.items():
            if val <= self.tau and val < self.fwd[qi].get(src, INF):
                self.fwd[qi][src] = val
                self._changed(src, qi, False)

    def _apply_replies(self):
        seeds = [dict() for _ in range(self.m)]
        for v, qi, d in self.rep_buf:
            if d < self.fwd[qi].get(v, INF) and d < seeds[qi].get(v, INF):
                seeds[qi][v] = d
        self.rep_buf = []
        for qi in range(self.m):
            if not seeds[qi]:
                continue
            if self.bt is not None:
                preds = self.bt.predecessors(qi)
            else:
                in_adj = self.frag.in_adj

                def preds(x, in_adj=in_adj):
                    return in_adj[x]
            changed, pops = propagate_update_batch(preds, seeds[qi], self.fwd[qi], self.tau)
            self.visited += pops
            for v in sorted(changed):
                self._changed(v, qi, False)

    def _apply_requests(self):
        merged: dict = {}
        for src, v, qi, budget in self.req_buf:
            key = (v, qi)
            self.requesters.setdefault(key, set()).add(src)
            self.dirty.add(key)
            if budget > merged.get(key, 0.0):
                merged[key] = budget
        self.req_buf = []
        per_vertex: dict = {}
        for (v, qi), budget in merged.items():
            if self.certified(v, qi):
                continue
            if budget <= self.req_budget.get((v, qi), 0.0):
                continue
            if self.feats.sketch and not is_candidate(self.sketches, self.frag, v, self.kw[qi],
                                                      budget, self.feats.bpads):
                continue
            self.req_budget[(v, qi)] = budget
            per_vertex.setdefault(v, {})[qi] = budget
        for v in sorted(per_vertex):
            self._expand(v, per_vertex[v])

    def _plan(self, r, drain: bool):
        """Radii for the slots of root r worth expanding now, or None."""
        tau = self.tau
        if not self.feats.prune:
            if drain:
                return None
            radius = {qi: tau for qi in range(self.m)
                      if self.slot(r, qi) > tau and (r, qi) not in self.expanded}
            return radius or None
        lbs = []
        certs = []
        for qi in range(self.m):
            d = self.slot(r, qi)
            front = self.frontier(qi)
            cert = d <= front
            lb = d if cert else front
            if not cert and self.feats.sketch:
                est = self.sketch_lower(r, qi)
                if est > lb:
                    lb = est
            if lb > tau:
                return None
            lbs.append(lb)
            certs.append(cert)
        total = sum(lbs)
        s = self.bound()
        if total > s:
            return None
        if self.feats.sketch and not drain and r not in self.approx_tried:
            self.approx_tried.add(r)
            if any(self.slot(r, qi) > tau for qi in range(self.m)):
                ups = [self.sketches.upper(r, q) for q in self.kw]
                est = approximate_score([self.slot(r, qi) for qi in range(self.m)], ups, tau)
                if est is not None and est < s:
                    self._offer(r, est, approx=True)
                    s = self.bound()
        radius = {}
        for qi in range(self.m):
            if certs[qi] or (r, qi) in self.expanded:
                continue
            if not drain and self.slot(r, qi) <= tau:
                continue
            rad = min(tau, s - (total - lbs[qi]))
            if rad >= lbs[qi]:
                radius[qi] = rad
        return radius or None

    def _run_roots(self, roots, drain: bool):
        parts = {}
        if self.feats.order:
            for r in roots:
                parts[r] = sum(d for d in (self.slot(r, qi) for qi in range(self.m)) if d <= self.tau)
        for r in order_frontier(roots, parts, self.feats.order):
            radius = self._plan(r, drain)
            if radius is None:
                continue
            for qi in radius:
                self.expanded.add((r, qi))
            self._expand(r, radius)

    def drain_roots(self) -> list:
        if not self.feats.prune:
            return []
        out = []
        for r in sorted(self.touched):
            if self._plan_preview(r):
                out.append(r)
        return out

    def _plan_preview(self, r) -> bool:
        tau = self.tau
        total = 0.0
        want = False
        for qi in range(self.m):
            d = self.slot(r, qi)
            front = self.frontier(qi)
            if d <= front:
                lb = d
            else:
                lb = front
                if self.feats.sketch:
                    est = self.sketch_lower(r, qi)
                    if est > lb:
                        lb = est
                if (r, qi) not in self.expanded:
                    want = True
            if lb > tau:
                return False
            total += lb
        return want and total <= self.bound()

    def _flush_replies(self):
        for v, qi in sorted(self.dirty):
            d = self.slot(v, qi)
            if d > self.tau:
                continue
            for dest in sorted(self.requesters.get((v, qi), ())):
                key = (v, qi, dest)
                if d < self.replied.get(key, INF):
                    self.replied[key] = d
                    self._send(dest, KIND_REPLY, v, qi, d)
        self.dirty.clear()

    def run_fkws(self):
        self._apply_replies()
        self._apply_requests()
        roots = list(self.pending)
        self.pending.clear()
        self._run_roots(roots, drain=False)
        self._flush_replies()

    def run_drain(self, roots):
        self._run_roots(roots, drain=True)
        self._flush_replies()

    def fkws_work(self) -> bool:
        return bool(self.req_buf or self.rep_buf or self.pending or self.dirty)

    def peval(self):
        self.seed_origins()
        self.run_bkws()
        self.run_fkws()

    def step(self, superstep: int):
        b_work = bool(self.bbuf) or self.bkws_runnable()
        f_work = self.fkws_work()
        if not b_work and not f_work:
            return
        if self.feats.free_selector:
            if b_work and f_work:
                si_b, si_f = staleness_indicators(self.bbuf, self.req_buf, self.rep_buf,
                                                  self.bound(), self.tau)
                choice = select_subtask(si_b, si_f)
            else:
                choice = "bkws" if b_work else "fkws"
        else:
            choice = "bkws" if superstep % 2 == 1 else "fkws"
        if choice == "bkws" and b_work:
            self.run_bkws()
        elif choice == "fkws" and f_work:
            self.run_fkws()

    def watermark(self) -> list:
        out = []
        for qi in range(self.m):
            w = self.bs.top(qi)
            for v, q2, d in self.bbuf:
                if q2 == qi and d < w:
                    w = d
            out.append(w)
        return out

    def complete_roots(self) -> list:
        pool = []
        seen = set()
        for src in (self.bs.dist[0], self.fwd[0]):
            for v in src:
                if v in seen or not self.frag.is_local[v]:
                    continue
                seen.add(v)
                total = 0.0
                ok = True
                for qi in range(self.m):
                    d = self.slot(v, qi)
                    if d > self.tau:
                        ok = False
                        break
                    total += d
                if ok:
                    pool.append((total, v))
        pool.sort()
        return pool


# ------------------------------------------------------------------ driver

def _deliver(workers, fr: Fragmentation, metrics: Metrics, transport) -> bool:
    delivered = False
    for w in workers:
        for (dest, kind), box in sorted(w.outbox.items()):
            if not box:
                continue
            target = fr.fragment(dest)
            tuples = [(v, w.kw[qi], val) for (v, qi), val in sorted(box.items())]
            metrics.count_frame(len(tuples))
            if transport is not None:
                kind, tuples = transport.carry(dest, kind, tuples)
            recv = workers[dest - 1]
            qmap = {q: i for i, q in enumerate(recv.kw)}
            for v, q, val in tuples:
                qi = qmap[q]
                if kind == KIND_BACKWARD or kind == KIND_REPLY:
                    if not (target.is_out_portal[v] and w.frag.is_in_portal[v]):
                        raise RoutingError(f"vertex {v} is not a portal from {w.wid} to {dest}")
                    (recv.bbuf if kind == KIND_BACKWARD else recv.rep_buf).append((v, qi, val))
                elif kind == KIND_REQUEST:
                    if not (target.is_in_portal[v] and w.frag.is_out_portal[v]):
                        raise RoutingError(f"request for {v} is not routable from {w.wid} to {dest}")
                    recv.req_buf.append((w.wid, v, qi, val))
                else:
                    raise RoutingError(f"unexpected frame kind {kind}")
            delivered = True
        w.outbox = {}
        w.outmin = [INF] * w.m
    return delivered


def _update_watermarks(workers):
    marks = [w.watermark() for w in workers]
    m = len(workers)
    nkw = workers[0].m
    for i, w in enumerate(workers):
        others = []
        for qi in range(nkw):
            best = INF
            for j in range(m):
                if j != i and marks[j][qi] < best:
                    best = marks[j][qi]
            others.append(best)
        w.w_others = others


def _empty_result(fr: Fragmentation) -> QueryResult:
    return QueryResult([], [], Metrics(visited_per_worker=[0] * fr.m))


def run_query(g: Graph, fr: Fragmentation, query: Query, variant: str = "pine",
              sketches=None, config: RunConfig | None = None) -> QueryResult:
    config = config or RunConfig()
    feats = features_for(variant, config, fr.m)
    if config.scheduler not in ("round-robin", "threads"):
        raise ValueError(f"unknown scheduler {config.scheduler!r}")
    if any(not g.keyword_index.get(q) for q in query.keywords):
        return _empty_result(fr)
    if feats.sketch and sketches is None:
        from .sketch import Sketches
        sketches = Sketches.build(g)

    t0 = time.perf_counter()
    metrics = Metrics()
    audit = Audit() if config.audit else None
    coord = Coordinator(fr.m, config.np_threshold, g.inf, config.deterministic, metrics, audit)
    workers = [Worker(f, g, query, feats, sketches, coord, audit) for f in fr.fragments]
    coord.workers = workers
    transport = SocketTransport(fr.m) if config.transport == "socket" else None
    pool = ThreadPoolExecutor(max_workers=fr.m) if config.scheduler == "threads" else None

    def each(fn):
        if pool is None:
            for w in workers:
                fn(w)
        else:
            list(pool.map(fn, workers))

    try:
        superstep = 1
        each(lambda w: w.peval())
        while True:
            delivered = _deliver(workers, fr, metrics, transport)
            _update_watermarks(workers)
            coord.barrier()
            if log.isEnabledFor(logging.DEBUG):
                log.debug("superstep %d bounds %s", superstep, [w.bound() for w in workers])
            if superstep >= config.max_supersteps:
                raise RuntimeError("superstep limit reached")
            busy = delivered or any(w.fkws_work() or w.bbuf or w.bkws_runnable() for w in workers)
            superstep += 1
            if busy:
                each(lambda w, s=superstep: w.step(s))
                continue
            drains = {w.wid: w.drain_roots() for w in workers}
            if not any(drains.values()):
                superstep -= 1
                break
            each(lambda w: w.run_drain(drains[w.wid]))
    finally:
        if pool is not None:
            pool.shutdown()
        if transport is not None:
            transport.close()

    answers, matches = assemble(workers, query.k)
    metrics.supersteps = superstep
    metrics.visited_per_worker = [w.visited for w in workers]
    metrics.visited_nodes = sum(metrics.visited_per_worker)
    metrics.elapsed_ms = (time.perf_counter() - t0) * 1000.0
    if audit is not None:
        metrics.audit_events = audit.events
        metrics.audit_violations = audit.violations
    return QueryResult(answers, matches, metrics)


def assemble(workers, k: int):
    """Global top-k over each worker's local top-k of complete roots."""
    gathered = []
    for w in workers:
        local = w.complete_roots()
        w.heap.resolve_approximate({r: s for s, r in local})
        gathered.extend(local[:k])
    gathered.sort()
    top = gathered[:k]
    owner = {}
    for w in workers:
        for _, r in top:
            if w.frag.is_local[r]:
                owner[r] = w
    answers = [(r, s) for s, r in top]
    matches = [Match(r, [owner[r].slot(r, qi) for qi in range(owner[r].m)]) for r, _ in answers]
    return answers, matches


def assemble_local_heaps(heaps, k: int) -> list:
    """Merge already-final local answer lists [(root, score)] into the global top-k."""
    merged = sorted((s, r) for h in heaps for r, s in h)
    out = []
    seen = set()
    for s, r in merged:
        if r in seen:
            continue
        seen.add(r)
        out.append((r, s))
        if len(out) == k:
            break
    return out


def configure_logging():
    level = os.environ.get("DKWS_LOG")
    if level:
        logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                            format="%(levelname)s %(name)s: %(message)s")
