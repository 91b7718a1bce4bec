"""Edge-cut fragmentation with in/out portal sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .graph import Graph

MASK64 = (1 << 64) - 1


class PartitionError(ValueError):
    pass


@dataclass
class Fragment:
    fid: int
    n: int
    local_vertices: list
    # out_adj[v]: all out-edges of a local v (targets local or out-portals)
    out_adj: list
    # in_adj[x]: in-edges (s, w) of x with a local source s; x is local or an out-portal
    in_adj: list
    # in_stubs[v]: in-edges of a local in-portal v whose source lives elsewhere
    in_stubs: dict
    in_portals: set
    out_portals: set
    # for an in-portal: fragments holding it as out-portal; for an out-portal: its owner
    portal_targets: dict
    is_local: bytearray = field(repr=False, default=None)
    is_out_portal: bytearray = field(repr=False, default=None)
    is_in_portal: bytearray = field(repr=False, default=None)

    def edge_count(self) -> int:
        return sum(len(self.out_adj[v]) for v in self.local_vertices)


@dataclass
class Fragmentation:
    m: int
    owner: list   # 1-based fragment ids
    fragments: list

    def fragment(self, fid: int) -> Fragment:
        return self.fragments[fid - 1]


def _mix(x: int) -> int:
    # splitmix64 finalizer
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def hash_owner(v: int, seed: int, m: int) -> int:
    return _mix((v * 0x100000001B3) ^ _mix(seed)) % m + 1


def partition_hash(g: Graph, m: int, seed: int = 0) -> Fragmentation:
    if m < 1:
        raise PartitionError("number of fragments must be at least 1")
    owner = [hash_owner(v, seed, m) for v in range(g.n)]
    return fragment_graph(g, owner, m)


def import_partition(g: Graph, part_lines: Iterable[str], m: int) -> Fragmentation:
    """Read a METIS-style partition: line i holds the 0-based part of vertex i."""
    if m < 1:
        raise PartitionError("number of fragments must be at least 1")
    owner = []
    for lineno, line in enumerate(part_lines, 1):
        s = line.strip()
        if not s:
            continue
        try:
            p = int(s)
        except ValueError:
            raise PartitionError(f"malformed part id on line {lineno}") from None
        if not 0 <= p < m:
            raise PartitionError(f"part id {p} out of range on line {lineno}")
        owner.append(p + 1)
    if len(owner) != g.n:
        raise PartitionError(f"expected {g.n} part ids, got {len(owner)}")
    return fragment_graph(g, owner, m)


def write_partition(frag: Fragmentation, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for o in frag.owner:
            f.write(f"{o - 1}\n")


def fragment_graph(g: Graph, owner: list, m: int) -> Fragmentation:
    n = g.n
    frags = []
    for fid in range(1, m + 1):
        is_local = bytearray(n)
        for v in range(n):
            if owner[v] == fid:
                is_local[v] = 1
        frags.append(Fragment(
            fid=fid, n=n,
            local_vertices=[v for v in range(n) if is_local[v]],
            out_adj=[[] for _ in range(n)],
            in_adj=[[] for _ in range(n)],
            in_stubs={},
            in_portals=set(), out_portals=set(), portal_targets={},
            is_local=is_local,
            is_out_portal=bytearray(n), is_in_portal=bytearray(n),
        ))

    for u in range(n):
        fu = frags[owner[u] - 1]
        for v, w in g.out_adj[u]:
            fu.out_adj[u].append((v, w))
            fu.in_adj[v].append((u, w))
            ov = owner[v]
            if ov != fu.fid:
                fv = frags[ov - 1]
                fu.out_portals.add(v)
                fu.portal_targets[v] = {ov}
                fv.in_portals.add(v)
                fv.portal_targets.setdefault(v, set()).add(fu.fid)
                fv.in_stubs.setdefault(v, []).append((u, w))

    for f in frags:
        for v in f.out_portals:
            f.is_out_portal[v] = 1
        for v in f.in_portals:
            f.is_in_portal[v] = 1
    return Fragmentation(m, list(owner), frags)


def check_fragmentation(g: Graph, fr: Fragmentation) -> None:
    """Assert the portal and edge-accounting invariants; raises AssertionError."""
    total = 0
    for f in fr.fragments:
        total += f.edge_count()
        for v in f.in_portals:
            assert fr.owner[v] == f.fid
            assert any(fr.owner[s] != f.fid for s, _ in g.in_adj[v])
        for v in f.out_portals:
            assert fr.owner[v] != f.fid
        for v in f.local_vertices:
            for t, _ in f.out_adj[v]:
                if fr.owner[t] != f.fid:
                    assert t in f.out_portals
                    assert t in fr.fragment(fr.owner[t]).in_portals
    assert total == g.edge_count
