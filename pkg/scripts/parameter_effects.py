"""How K, L and R move recall, similarity and time on a planted dataset.

Each parameter is varied alone around the defaults; results go to one CSV.

    python3 scripts/parameter_effects.py -o results/parameter_effects.csv
"""

import argparse
import logging
import sys
from pathlib import Path

from reservoir_lsh.evaluation import ground_truth, sweep, warm_up, write_csv
from reservoir_lsh.synth import planted_clusters

GRIDS = {
    "K": [1, 2, 3, 4, 5, 6],
    "L": [8, 16, 32, 64, 128],
    "R": [4, 8, 16, 32, 64, 128],
}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--dim", type=int, default=100_000)
    p.add_argument("--nnz", type=int, default=50)
    p.add_argument("--clusters", type=int, default=250)
    p.add_argument("--overlap", type=float, default=0.8)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--sample", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", default="-")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    data, _ = planted_clusters(args.n, args.dim, args.nnz, args.clusters, args.overlap)
    truth = ground_truth(data, args.sample)
    warm_up()
    reports = []
    for name, values in GRIDS.items():
        logging.info("varying %s over %s", name, values)
        reports += sweep(data, {name: values}, args.k, truth, args.workers)

    if args.output == "-":
        write_csv(reports, sys.stdout)
    else:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        with open(args.output, "w", newline="") as fh:
            write_csv(reports, fh)
    for r in reports:
        logging.info("K=%d L=%3d R=%3d  R@k=%.3f  S@k=%.3f  index %.3fs  query %.3fs",
                     r.K, r.L, r.R, r.r_at_k, r.s_at_k, r.index_s, r.query_s)


if __name__ == "__main__":
    main()
