"""Command-line front end: ``reservoir-lsh <command> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, fields, replace

from .evaluation import ground_truth, run_config, sweep, write_csv
from .index import IndexConfig, ReservoirIndex
from .query import knn_graph, query_batch
from .sparse import LibsvmParseError, read_libsvm, write_libsvm
from .synth import planted_clusters

log = logging.getLogger("reservoir_lsh")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 1, 2, 3
INDEX_FLAGS = ("K", "L", "R", "rangebits", "F", "seed")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = ""
    input: str | None = None
    output: str | None = None
    K: int = 4
    L: int = 32
    R: int = 32
    rangebits: int = 15
    F: float = 1.0
    seed: int = 0
    workers: int = os.cpu_count() or 1
    dim: int | None = None

    def index_config(self) -> IndexConfig:
        return IndexConfig.make(K=self.K, L=self.L, rangebits=self.rangebits, R=self.R,
                                F=self.F, seed=self.seed)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _index_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("index parameters (defaults K=4 L=32 R=32 rangebits=15 F=1)")
    g.add_argument("--K", type=int, help="hashes per table key")
    g.add_argument("--L", type=int, help="number of hash tables")
    g.add_argument("--R", type=int, help="reservoir size")
    g.add_argument("--rangebits", type=int, help="log2 of table size")
    g.add_argument("--F", type=float, help="reservoir allocation fraction in (0, 1]")
    g.add_argument("--seed", type=int, help="root random seed")
    g.add_argument("--workers", type=int, help="worker threads (default: all cores)")
    g.add_argument("--config", help="JSON file of defaults; flags override it")


def _list(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reservoir-lsh", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-synth", help="write a planted-cluster libsvm dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--nnz", type=int, required=True)
    p.add_argument("--clusters", type=int, default=1)
    p.add_argument("--overlap", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")

    p = sub.add_parser("build", help="index a libsvm file")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="index file")
    p.add_argument("--dim", type=int)
    _index_flags(p)

    p = sub.add_parser("query", help="query a saved index with a libsvm file")
    p.add_argument("index")
    p.add_argument("queries")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--exclude-self", action="store_true",
                   help="drop id i from the answer to query line i")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("-o", "--output")
    _index_flags(p)

    p = sub.add_parser("knn-graph", help="build an index and its k-NN graph")
    p.add_argument("input")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--index", help="reuse a saved index instead of building")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("-o", "--output", help="TSV adjacency (default stdout)")
    p.add_argument("--csv", help="also write a source,target,count,rank CSV")
    p.add_argument("--dim", type=int)
    _index_flags(p)

    p = sub.add_parser("eval", help="R@k and S@k against the brute-force oracle")
    p.add_argument("input")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--sample", type=int)
    p.add_argument("--metric", choices=("cosine", "jaccard"), default="cosine")
    p.add_argument("-o", "--output")
    p.add_argument("--dim", type=int)
    _index_flags(p)

    p = sub.add_parser("sweep", help="grid of index parameters, CSV out")
    p.add_argument("input")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--sample", type=int)
    p.add_argument("--metric", choices=("cosine", "jaccard"), default="cosine")
    p.add_argument("--grid", help="JSON object mapping parameter to list of values")
    for name, kind in (("K", int), ("L", int), ("R", int), ("rangebits", int),
                       ("F", float), ("seed", int)):
        p.add_argument(f"--{name}", type=_list(kind), dest=f"grid_{name}",
                       help="comma-separated values")
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output")
    p.add_argument("--dim", type=int)
    return parser


def resolve(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = RunConfig(command=args.command)
    known = {f.name for f in fields(RunConfig)}
    path = getattr(args, "config", None)
    if path:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown keys in {path}: {sorted(unknown)}")
        cfg = replace(cfg, **data)
    overrides = {k: v for k, v in vars(args).items() if k in known and v is not None}
    cfg = replace(cfg, **overrides)
    if cfg.workers < 1:
        raise UsageError("--workers must be >= 1")
    return cfg


def _out(path):
    return open(path, "w", encoding="utf-8", newline="\n") if path else sys.stdout


def _close(fh):
    if fh is not sys.stdout:
        fh.close()


def _timings(**phases):
    print(" ".join(f"{k}_s={v:.4f}" for k, v in phases.items()), file=sys.stderr)


def cmd_gen_synth(args) -> None:
    data, _ = planted_clusters(args.n, args.dim, args.nnz, args.clusters, args.overlap,
                               args.seed)
    fh = _out(args.output)
    try:
        write_libsvm(data, fh)
    finally:
        _close(fh)


def cmd_build(args) -> None:
    cfg = resolve(args)
    data = read_libsvm(cfg.input, cfg.dim)
    t0 = time.perf_counter()
    index = ReservoirIndex(cfg.index_config())
    t1 = time.perf_counter()
    index.add_all(data, cfg.workers)
    t2 = time.perf_counter()
    index.save(cfg.output)
    _timings(init=t1 - t0, index=t2 - t1, write=time.perf_counter() - t2)


def _check_flags(args, index: ReservoirIndex) -> None:
    stored = {"K": index.config.hash.K, "L": index.config.hash.L, "R": index.config.R,
              "rangebits": index.config.hash.rangebits, "F": index.config.F,
              "seed": index.config.hash.seed}
    cfg = resolve(args)
    given = {k for k in INDEX_FLAGS if getattr(args, k, None) is not None}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            given |= set(json.load(fh)) & set(INDEX_FLAGS)
    bad = {k: (getattr(cfg, k), stored[k]) for k in given if getattr(cfg, k) != stored[k]}
    if bad:
        detail = ", ".join(f"{k}={a} (index has {b})" for k, (a, b) in sorted(bad.items()))
        raise UsageError(f"parameters do not match the index: {detail}")


def cmd_query(args) -> None:
    index = ReservoirIndex.load(args.index)
    _check_flags(args, index)
    cfg = resolve(args)
    queries = read_libsvm(args.queries)
    exclude = queries.ids if args.exclude_self else None
    t0 = time.perf_counter()
    graph = query_batch(index, queries, args.k, exclude, cfg.workers, args.min_count)
    _timings(query=time.perf_counter() - t0)
    fh = _out(args.output)
    try:
        for i in range(len(graph)):
            fh.write(f"{i}: {graph[i].format()}\n")
    finally:
        _close(fh)


def cmd_knn_graph(args) -> None:
    cfg = resolve(args)
    data = read_libsvm(cfg.input, cfg.dim)
    t0 = time.perf_counter()
    if args.index:
        index = ReservoirIndex.load(args.index)
        _check_flags(args, index)
        t1 = t2 = time.perf_counter()
    else:
        index = ReservoirIndex(cfg.index_config())
        t1 = time.perf_counter()
        index.add_all(data, cfg.workers)
        t2 = time.perf_counter()
    graph = knn_graph(index, data, args.k, cfg.workers, args.min_count)
    _timings(init=t1 - t0, index=t2 - t1, query=time.perf_counter() - t2)
    fh = _out(args.output)
    try:
        graph.write_tsv(fh)
    finally:
        _close(fh)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            graph.write_csv(fh)


def cmd_eval(args) -> None:
    cfg = resolve(args)
    data = read_libsvm(cfg.input, cfg.dim)
    truth = ground_truth(data, args.sample, args.metric, seed=cfg.seed)
    report, _, _ = run_config(data, cfg.index_config(), truth, args.k, cfg.workers)
    fh = _out(args.output)
    try:
        write_csv([report], fh)
    finally:
        _close(fh)


def cmd_sweep(args) -> None:
    grid = {}
    if args.grid:
        with open(args.grid, encoding="utf-8") as fh:
            grid = json.load(fh)
    for name in INDEX_FLAGS:
        values = getattr(args, f"grid_{name}")
        if values:
            grid[name] = values
    workers = args.workers or os.cpu_count() or 1
    data = read_libsvm(args.input, args.dim)
    truth = ground_truth(data, args.sample, args.metric, seed=0)
    try:
        reports = sweep(data, grid, args.k, truth, workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fh = _out(args.output)
    try:
        write_csv(reports, fh)
    finally:
        _close(fh)


COMMANDS = {"gen-synth": cmd_gen_synth, "build": cmd_build, "query": cmd_query,
            "knn-graph": cmd_knn_graph, "eval": cmd_eval, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        name = exc.filename or ""
        print(f"I/O error: {name}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except (LibsvmParseError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
