"""Bounded reservoirs versus unbounded buckets as duplicates take over.

For growing duplicate fractions, compares the k-NN graph time of the
reservoir index with the candidate volume an unbounded-bucket table would
have to rank, using the very same hash addresses.

    python3 scripts/skew_contrast.py
"""

import argparse
import logging
import time

import numpy as np

from reservoir_lsh.doph import signatures, table_addresses
from reservoir_lsh.evaluation import warm_up
from reservoir_lsh.index import IndexConfig, build
from reservoir_lsh.query import knn_graph
from reservoir_lsh.synth import planted_clusters, with_hot_duplicates


def unbounded_candidates(data, cfg):
    """Total bucket entries every query would read with buckets that keep
    every point (the classic table)."""
    sig = signatures(data, cfg.hash)
    addrs = np.array([table_addresses(s, cfg.hash) for s in sig])
    total = 0
    for t in range(cfg.hash.L):
        _, inverse, counts = np.unique(addrs[:, t], return_inverse=True, return_counts=True)
        total += int(counts[inverse].sum())
    return total


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--fractions", default="0,0.1,0.25,0.5,0.75")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    base, _ = planted_clusters(args.n, 100_000, 50, 250, 0.8)
    cfg = IndexConfig.make()
    warm_up()
    logging.info("%8s %10s %14s %16s", "dup", "graph_s", "bounded_reads", "unbounded_reads")
    for frac in map(float, args.fractions.split(",")):
        data = with_hot_duplicates(base, frac) if frac > 0 else base
        index = build(data, cfg)
        knn_graph(index, data, args.k)
        t0 = time.perf_counter()
        knn_graph(index, data, args.k)
        elapsed = time.perf_counter() - t0
        logging.info("%8.2f %10.3f %14d %16d", frac, elapsed, _reads(index, data),
                     unbounded_candidates(data, cfg))


def _reads(index, data):
    """Bucket entries the reservoir index reads across all queries."""
    h = index.config.hash
    sig = signatures(data, h)
    total = 0
    for s in sig:
        seen = set()
        for t, a in enumerate(table_addresses(s, h).tolist()):
            r = index.binding(t, a)
            if r >= 0 and r not in seen:
                seen.add(r)
                total += min(int(index.counters[r]), index.R)
    return total


if __name__ == "__main__":
    main()
