"""Command-line entry point: index, partition, query, bench, oracle, generate."""

from __future__ import annotations

import argparse
import csv
import heapq
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .graph import GraphError, load_graph_files, make_query, write_graph_files
from .oracle import brute_top_k
from .partition import PartitionError, import_partition, partition_hash, write_partition
from .runtime import VARIANTS, RunConfig, configure_logging, run_query
from .sketch import Sketches, read_sketches, write_sketches
from .workload import make_graph, sample_queries

CSV_COLUMNS = ["variant", "query_id", "num_keywords", "tau", "k", "workers", "elapsed_ms",
               "supersteps", "msg_count", "msg_bytes", "visited_nodes", "results"]


def _on_off(text: str) -> bool:
    t = text.lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _fmt(x: float) -> str:
    return f"{x:g}"


def format_results(answers) -> str:
    return ";".join(f"{r}:{_fmt(s)}" for r, s in answers)


def csv_row(variant, query_id, query, workers, result) -> dict:
    m = result.metrics
    return {
        "variant": variant, "query_id": query_id, "num_keywords": len(query.keywords),
        "tau": _fmt(query.tau), "k": query.k, "workers": workers,
        "elapsed_ms": f"{m.elapsed_ms:.3f}", "supersteps": m.supersteps,
        "msg_count": m.msg_count, "msg_bytes": m.msg_bytes,
        "visited_nodes": m.visited_nodes, "results": format_results(result.answers),
    }


def append_rows(path, rows) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            w.writeheader()
        for row in rows:
            w.writerow(row)


def find_leaf(g, root: int, q: int, dist: float):
    """Nearest vertex labeled q reachable from root at exactly ``dist``."""
    seen = {root: 0.0}
    pq = [(0.0, root)]
    while pq:
        d, v = heapq.heappop(pq)
        if d > dist:
            break
        if d > seen[v]:
            continue
        if q in g.labels[v] and d == dist:
            return v
        for t, w in g.out_adj[v]:
            nd = d + w
            if nd < seen.get(t, float("inf")):
                seen[t] = nd
                heapq.heappush(pq, (nd, t))
    return None


# ------------------------------------------------------------------ shared loading

def _add_graph_args(p):
    p.add_argument("--edges", required=True, help="edge list file (u v w per line)")
    p.add_argument("--labels", help="label file (u kw1 kw2 ...)")
    p.add_argument("--vertices", type=int, help="declared vertex count")


def _add_run_args(p):
    p.add_argument("--workers", type=int, default=8)
    p.add_argument("--partition", help="METIS-style partition file (overrides hashing)")
    p.add_argument("--seed", type=int, default=0, help="hash-partition seed")
    p.add_argument("--sketches", help="sketch file from 'index' (built on the fly otherwise)")
    p.add_argument("--k-param", type=int, default=4)
    p.add_argument("--np-threshold", type=int, default=2)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--selector", choices=("free", "forced"))
    p.add_argument("--scheduler", choices=("round-robin", "threads"), default="round-robin")
    p.add_argument("--opt-backtrack", type=_on_off)
    p.add_argument("--opt-bpads", type=_on_off)
    p.add_argument("--opt-order", type=_on_off)
    p.add_argument("--csv", help="append one metrics row per run to this CSV file")


def _load(args):
    return load_graph_files(args.edges, args.labels, args.vertices)


def _fragmentation(g, args):
    if args.partition:
        with open(args.partition, encoding="utf-8") as fh:
            return import_partition(g, fh, args.workers)
    return partition_hash(g, args.workers, args.seed)


def _sketches(g, args):
    if args.sketches:
        return read_sketches(args.sketches, g)
    return Sketches.build(g, args.k_param)


def _config(args) -> RunConfig:
    return RunConfig(np_threshold=args.np_threshold, deterministic=args.deterministic,
                     opt_backtrack=args.opt_backtrack, opt_bpads=args.opt_bpads,
                     opt_order=args.opt_order, selector=args.selector,
                     scheduler=args.scheduler)


# ------------------------------------------------------------------ commands

def cmd_index(args) -> int:
    g = _load(args)
    sk = Sketches.build(g, args.k_param)
    fr = None
    if args.partition:
        with open(args.partition, encoding="utf-8") as fh:
            fr = import_partition(g, fh, args.workers)
    write_sketches(args.out, g, sk, fr)
    print(f"wrote {args.out}: {g.n} vertices, mean sketch size {sk.pads.mean_size():.2f}")
    return 0


def cmd_partition(args) -> int:
    g = _load(args)
    fr = partition_hash(g, args.workers, args.seed)
    write_partition(fr, args.out)
    cut = sum(len(f.out_portals) for f in fr.fragments)
    print(f"wrote {args.out}: {args.workers} fragments, {cut} out-portal copies")
    return 0


def cmd_query(args) -> int:
    g = _load(args)
    names = [s for s in args.keywords.split(",") if s]
    query = make_query(g, names, args.tau, args.k)
    fr = _fragmentation(g, args)
    sk = _sketches(g, args) if args.variant in ("pads", "np", "pine") else None
    res = run_query(g, fr, query, args.variant, sk, _config(args))
    if not res.answers:
        print("no matches")
    for match in res.matches:
        parts = []
        for q, d in zip(query.keywords, match.dists):
            leaf = find_leaf(g, match.root, q, d)
            parts.append(f"{g.keyword_name(q)}={leaf}:{_fmt(d)}")
        print(f"{match.root}\t{_fmt(sum(match.dists))}\t{' '.join(parts)}")
    if args.csv:
        append_rows(args.csv, [csv_row(args.variant, args.query_id, query, fr.m, res)])
    return 0


_BENCH = {}


def _bench_one(job):
    qid, query, variant = job
    g, fr, sk, cfg = _BENCH["g"], _BENCH["fr"], _BENCH["sk"], _BENCH["cfg"]
    res = run_query(g, fr, query, variant, sk, cfg)
    return csv_row(variant, qid, query, fr.m, res)


def cmd_bench(args) -> int:
    if args.generate:
        kind, _, n = args.generate.partition(":")
        g = make_graph(kind, int(n or 1000), seed=args.graph_seed)
    elif args.edges:
        g = _load(args)
    else:
        print("bench needs --edges or --generate", file=sys.stderr)
        return 2
    variants = [v for v in args.variants.split(",") if v]
    for v in variants:
        if v not in VARIANTS:
            print(f"unknown variant {v!r}", file=sys.stderr)
            return 2
    sizes = [int(s) for s in args.sizes.split(",") if s]
    fr = _fragmentation(g, args)
    sk = _sketches(g, args) if any(v in ("pads", "np", "pine") for v in variants) else None
    jobs = []
    for size in sizes:
        try:
            queries = sample_queries(g, size, args.queries, args.tau, args.k, seed=args.seed * 1000 + size)
        except ValueError as exc:
            print(str(exc), file=sys.stderr)
            return 2
        for i, q in enumerate(queries):
            for v in variants:
                jobs.append((f"q{size}-{i}", q, v))
    _BENCH.update(g=g, fr=fr, sk=sk, cfg=_config(args))
    if args.parallel_queries > 1:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(args.parallel_queries, mp_context=ctx) as pool:
            rows = list(pool.map(_bench_one, jobs, chunksize=4))
    else:
        rows = [_bench_one(j) for j in jobs]
    mismatches = 0
    if args.check_oracle:
        expected = {}
        for (qid, q, _), row in zip(jobs, rows):
            if qid not in expected:
                expected[qid] = format_results(brute_top_k(g, q))
            got = sorted(float(x.split(":")[1]) for x in row["results"].split(";") if x)
            want = sorted(float(x.split(":")[1]) for x in expected[qid].split(";") if x)
            if got != want:
                mismatches += 1
    out = args.csv or args.out
    if out:
        append_rows(out, rows)
    print(f"{len(rows)} rows" + (f" written to {out}" if out else ""))
    if args.check_oracle:
        print(f"oracle mismatches: {mismatches}")
        return 1 if mismatches else 0
    return 0


def cmd_oracle(args) -> int:
    g = _load(args)
    query = make_query(g, [s for s in args.keywords.split(",") if s], args.tau, args.k)
    ans = brute_top_k(g, query)
    if not ans:
        print("no matches")
    for r, s in ans:
        print(f"{r}\t{_fmt(s)}")
    return 0


def cmd_generate(args) -> int:
    g = make_graph(args.kind, args.n, seed=args.graph_seed, num_keywords=args.num_keywords)
    write_graph_files(g, args.edges, args.labels)
    print(f"wrote {args.edges} and {args.labels}: {g.n} vertices, {g.edge_count} edges")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dkws", description="distributed top-k keyword search")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("index", help="build and persist sketches")
    _add_graph_args(p)
    p.add_argument("--k-param", type=int, default=4)
    p.add_argument("--partition", help="partition file; adds per-fragment border sketches")
    p.add_argument("--workers", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("partition", help="hash-partition a graph into a METIS-style file")
    _add_graph_args(p)
    p.add_argument("--workers", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_partition)

    p = sub.add_parser("query", help="run one query")
    _add_graph_args(p)
    _add_run_args(p)
    p.add_argument("--keywords", required=True, help="comma-separated keyword names")
    p.add_argument("--tau", type=float, default=3)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--variant", default="pine", choices=VARIANTS)
    p.add_argument("--query-id", default="q0")
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("bench", help="run the query-size sweep and write CSV rows")
    p.add_argument("--edges")
    p.add_argument("--labels")
    p.add_argument("--vertices", type=int)
    p.add_argument("--generate", help="synthetic graph instead of files, e.g. er:1000 or pa:1000")
    p.add_argument("--graph-seed", type=int, default=0)
    _add_run_args(p)
    p.add_argument("--variants", default=",".join(VARIANTS))
    p.add_argument("--sizes", default="2,3,4,5,6")
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--tau", type=float, default=3)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", help="CSV output (same as --csv)")
    p.add_argument("--parallel-queries", type=int, default=1)
    p.add_argument("--check-oracle", action="store_true")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("oracle", help="brute-force top-k")
    _add_graph_args(p)
    p.add_argument("--keywords", required=True)
    p.add_argument("--tau", type=float, default=3)
    p.add_argument("--k", type=int, default=10)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("generate", help="write a seeded synthetic graph")
    p.add_argument("--kind", choices=("er", "pa"), default="er")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--graph-seed", type=int, default=0)
    p.add_argument("--num-keywords", type=int, default=20)
    p.add_argument("--edges", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(fn=cmd_generate)
    return ap


def main(argv=None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (GraphError, PartitionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
