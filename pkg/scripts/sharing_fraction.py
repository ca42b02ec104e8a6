"""Quality and memory as the reservoir pool shrinks (F from 1 down to 0.05).

    python3 scripts/sharing_fraction.py -o results/sharing_fraction.csv
"""

import argparse
import csv
import logging
import sys

from reservoir_lsh.evaluation import ground_truth, run_config, warm_up
from reservoir_lsh.index import IndexConfig
from reservoir_lsh.synth import planted_clusters

FRACTIONS = [1.0, 0.8, 0.6, 0.5, 0.4, 0.3, 0.2, 0.15, 0.1, 0.05]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--rangebits", type=int, default=15)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--sample", type=int, default=2000)
    p.add_argument("--local-share", type=float, default=1.0,
                   help="part of each table's allotment bound before overflowing to the pool")
    p.add_argument("-o", "--output", default="-")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    data, _ = planted_clusters(args.n, 100_000, 50, 250, 0.8)
    truth = ground_truth(data, args.sample)
    warm_up()
    fh = sys.stdout if args.output == "-" else open(args.output, "w", newline="")
    w = csv.writer(fh)
    w.writerow(["F", "r_at_k", "s_at_k", "pool_mb", "touched_mb", "bound_reservoirs", "index_s"])
    full_s = None
    for F in FRACTIONS:
        cfg = IndexConfig.make(rangebits=args.rangebits, F=F, local_share=args.local_share)
        report, index, _ = run_config(data, cfg, truth, args.k)
        full_s = full_s or report.s_at_k
        w.writerow([F, f"{report.r_at_k:.4f}", f"{report.s_at_k:.4f}",
                    f"{index.pool_bytes / 2**20:.1f}", f"{index.allocated_bytes / 2**20:.1f}",
                    index.bound_reservoirs(), f"{report.index_s:.3f}"])
        logging.info("F=%.2f  S@k=%.4f (%.1f%% of F=1)  pool %.0f MB", F, report.s_at_k,
                     100 * report.s_at_k / full_s, index.pool_bytes / 2**20)
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
