"""Ground truth, R@k / S@k, and parameter sweeps."""

from __future__ import annotations

import csv
import itertools
import logging
import time
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .index import IndexConfig, ReservoirIndex
from .query import KnnGraph, QueryResult, knn_graph
from .sparse import Dataset, cosine, similarity_evaluations, similarity_matrix

log = logging.getLogger(__name__)

CSV_FIELDS = ["K", "L", "R", "F", "rangebits", "workers", "init_s", "index_s", "query_s",
              "r_at_k", "s_at_k", "k", "seed"]


@dataclass
class QueryTruth:
    ids: np.ndarray      # exact neighbors, best first, ties by id, truncated
    sims: np.ndarray
    best: np.ndarray     # every id attaining the top similarity


@dataclass
class GroundTruth:
    query_ids: np.ndarray
    entries: list[QueryTruth]
    metric: str

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> QueryTruth:
        return self.entries[i]


def ground_truth(data: Dataset, sample: int | None = None, metric: str = "cosine",
                 seed: int = 0, depth: int | None = 100, chunk: int = 256) -> GroundTruth:
    """Exact neighbors of ``sample`` query ids drawn without replacement.

    ``depth`` truncates each ranked list (None keeps all ``N - 1``); the
    tied-best set is always complete.
    """
    n = len(data)
    sample = min(n, 10000) if sample is None else sample
    if sample > n:
        raise ValueError(f"sample {sample} exceeds dataset size {n}")
    rng = np.random.default_rng(seed)
    qids = np.sort(rng.choice(n, sample, replace=False)) if sample < n else np.arange(n)
    entries = []
    for start in range(0, sample, chunk):
        block = qids[start:start + chunk]
        sims = similarity_matrix(data.subset(block), data, metric)
        for row, q in zip(sims, block):
            ids = np.arange(n)
            keep = ids != q
            ids, row = ids[keep], row[keep]
            order = np.lexsort((ids, -row))
            if depth is not None:
                order = order[:depth]
            best = ids[row == row.max()] if row.size else ids
            entries.append(QueryTruth(ids[order], row[order], best))
    return GroundTruth(qids, entries, metric)


def _ids(result) -> np.ndarray:
    if isinstance(result, QueryResult):
        return result.ids
    return np.asarray([r[0] if isinstance(r, tuple) else r for r in result], dtype=np.int64)


def r_at_k(result, truth: QueryTruth, k: int) -> float:
    """1.0 if a true nearest neighbor is among the first ``k`` results."""
    if truth.best.size == 0:
        raise ValueError("empty ground truth")
    got = _ids(result)[:k]
    return float(np.isin(got, truth.best).any())


def s_at_k(result, query, data: Dataset, k: int) -> float:
    """Mean exact cosine between ``query`` and the first ``k`` results."""
    got = _ids(result)[:k]
    got = got[got >= 0]
    if got.size == 0:
        return 0.0
    return float(np.mean([cosine(query, data[int(i)]) for i in got]))


def pair_cosines(data: Dataset, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cosine of rows ``a[i]`` and ``b[i]`` for every i, vectorized."""
    x = data.to_csr()
    inter = np.asarray(x[a].multiply(x[b]).sum(axis=1)).ravel()
    similarity_evaluations.add(a.size)
    nnz = data.nnz.astype(np.float64)
    denom = np.sqrt(nnz[a] * nnz[b])
    return np.divide(inter, denom, out=np.zeros(a.size), where=denom > 0)


def score_graph(graph: KnnGraph, truth: GroundTruth, data: Dataset, k: int) -> tuple[float, float]:
    """Mean R@k and S@k of a k-NN graph over the ground-truth queries."""
    if len(truth) == 0:
        return 0.0, 0.0
    recall = np.mean([r_at_k(graph[int(q)], e, k) for q, e in zip(truth.query_ids, truth.entries)])
    ids = graph.ids[truth.query_ids, :k]
    rows = np.repeat(truth.query_ids, ids.shape[1]).reshape(ids.shape)
    valid = ids >= 0
    cos = np.zeros(ids.shape)
    cos[valid] = pair_cosines(data, rows[valid], ids[valid])
    per_query = np.divide(cos.sum(axis=1), valid.sum(axis=1),
                          out=np.zeros(ids.shape[0]), where=valid.any(axis=1))
    return float(recall), float(per_query.mean())


@dataclass
class MetricsReport:
    K: int
    L: int
    R: int
    F: float
    rangebits: int
    workers: int
    init_s: float
    index_s: float
    query_s: float
    r_at_k: float
    s_at_k: float
    k: int
    seed: int
    error: str | None = None

    def row(self) -> dict:
        d = asdict(self)
        if self.error is not None:
            for f in ("init_s", "index_s", "query_s", "r_at_k", "s_at_k"):
                d[f] = ""
        return {f: d[f] for f in CSV_FIELDS}


def run_config(data: Dataset, config: IndexConfig, truth: GroundTruth, k: int,
               workers: int = 1) -> tuple[MetricsReport, ReservoirIndex, KnnGraph]:
    """Build, compute the full k-NN graph, and score it, timing each phase."""
    t0 = time.perf_counter()
    index = ReservoirIndex(config)
    t1 = time.perf_counter()
    index.add_all(data, workers)
    t2 = time.perf_counter()
    graph = knn_graph(index, data, k, workers)
    t3 = time.perf_counter()
    r, s = score_graph(graph, truth, data, k)
    h = config.hash
    report = MetricsReport(h.K, h.L, config.R, config.F, h.rangebits, workers,
                           t1 - t0, t2 - t1, t3 - t2, r, s, k, h.seed)
    return report, index, graph


def warm_up() -> None:
    """Compile the hashing, build and query kernels on a toy input so the
    first timed run does not pay for JIT compilation."""
    data = Dataset.from_vectors([[0, 1, 2], [1, 2, 3], [5, 6]])
    index = ReservoirIndex(IndexConfig.make(K=1, L=2, rangebits=4, R=5))
    index.add_all(data, 1)
    knn_graph(index, data, 2)


def grid_configs(grid: dict[str, Sequence], base: IndexConfig | None = None) -> list[dict]:
    """Cartesian product over any of K, L, R, F, rangebits, seed."""
    base = base or IndexConfig()
    defaults = dict(K=base.hash.K, L=base.hash.L, rangebits=base.hash.rangebits,
                    seed=base.hash.seed, R=base.R, F=base.F)
    unknown = set(grid) - set(defaults)
    if unknown:
        raise ValueError(f"unknown grid parameters: {sorted(unknown)}")
    keys = list(grid)
    out = []
    for combo in itertools.product(*(grid[key] for key in keys)):
        params = {**defaults, **dict(zip(keys, combo))}
        out.append(params)
    return out


def sweep(data: Dataset, grid: dict[str, Sequence] | Iterable[dict], k: int,
          truth: GroundTruth, workers: int = 1, base: IndexConfig | None = None) -> list[MetricsReport]:
    """One build + graph + evaluation per grid point; failures are recorded
    on the report and the sweep continues."""
    points = grid_configs(grid, base) if isinstance(grid, dict) else list(grid)
    local_share = base.local_share if base else 1.0
    reports = []
    for p in points:
        try:
            config = IndexConfig.make(local_share=local_share, **p)
            report, _, _ = run_config(data, config, truth, k, workers)
        except Exception as exc:  # noqa: BLE001 - one bad point must not end the sweep
            log.warning("grid point %s failed: %s", p, exc)
            report = MetricsReport(p["K"], p["L"], p["R"], p["F"], p["rangebits"], workers,
                                   float("nan"), float("nan"), float("nan"),
                                   float("nan"), float("nan"), k, p["seed"], error=str(exc))
        reports.append(report)
    return reports


def write_csv(reports: Iterable[MetricsReport], stream: TextIO) -> None:
    w = csv.DictWriter(stream, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
