"""Bucket aggregation and count-based top-k selection.

Candidates are ranked purely by how many of the query's L buckets they
appear in; no similarity against any candidate is ever computed.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, TextIO

import numba
import numpy as np

from .doph import EmptyVectorError, _addresses, _doph, doph_signature, table_addresses
from .index import ReservoirIndex


@dataclass(frozen=True)
class QueryResult:
    ids: np.ndarray
    counts: np.ndarray

    @property
    def neighbors(self) -> list[tuple[int, int]]:
        return list(zip(self.ids.tolist(), self.counts.tolist()))

    def __len__(self) -> int:
        return int(self.ids.size)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.neighbors)

    def format(self) -> str:
        return " ".join(f"{i}:{c}" for i, c in self.neighbors)


def _reservoirs(index: ReservoirIndex, q) -> list[int]:
    """Distinct pool reservoirs addressed by ``q``, in table order."""
    sig = doph_signature(q, index.config.hash)
    addrs = table_addresses(sig, index.config.hash)
    seen: list[int] = []
    for t, a in enumerate(addrs.tolist()):
        r = index.binding(t, a)
        if r >= 0 and r not in seen:
            seen.append(r)
    return seen


def aggregate(index: ReservoirIndex, q) -> np.ndarray:
    """Concatenate the occupied slots of every reservoir the query addresses.

    A reservoir shared by several of the query's cells is read once.
    """
    if len(getattr(q, "indices", q)) == 0:
        raise EmptyVectorError()
    parts = [index.reservoir_ids(r) for r in _reservoirs(index, q)]
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


def count_frequencies(a) -> list[tuple[int, int]]:
    """Each distinct id with its full multiplicity, ascending by id."""
    ids, counts = np.unique(np.asarray(a, dtype=np.int64), return_counts=True)
    return list(zip(ids.tolist(), counts.tolist()))


def _select(ids: np.ndarray, counts: np.ndarray, k: int, exclude, min_count: int) -> QueryResult:
    keep = counts >= min_count
    if exclude is not None:
        keep &= ids != exclude
    ids, counts = ids[keep], counts[keep]
    order = np.argsort(-counts, kind="stable")[:k]
    return QueryResult(ids[order], counts[order])


def k_select(a, k: int, exclude: int | None = None, min_count: int = 1) -> QueryResult:
    """Top-``k`` ids by count, ties broken by ascending id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ids, counts = np.unique(np.asarray(a, dtype=np.int64), return_counts=True)
    return _select(ids, counts, k, exclude, min_count)


def query(index: ReservoirIndex, q, k: int, exclude: int | None = None,
          min_count: int = 1) -> QueryResult:
    return k_select(aggregate(index, q), k, exclude, min_count)


@numba.njit(nogil=True)
def _radix_sort(a, n, hi, tmp, hist):
    """Sort the non-negative ``a[:n]`` (all ``<= hi``) in place, 8 bits per pass."""
    if n <= 64:
        for i in range(1, n):
            v = a[i]
            j = i - 1
            while j >= 0 and a[j] > v:
                a[j + 1] = a[j]
                j -= 1
            a[j + 1] = v
        return
    src, dst = a, tmp
    shift = 0
    passes = 0
    while shift == 0 or (hi >> shift) > 0:
        hist[:] = 0
        for i in range(n):
            hist[((src[i] >> shift) & 255) + 1] += 1
        for b in range(1, 257):
            hist[b] += hist[b - 1]
        for i in range(n):
            d = (src[i] >> shift) & 255
            dst[hist[d]] = src[i]
            hist[d] += 1
        src, dst = dst, src
        shift += 8
        passes += 1
    if passes % 2 == 1:
        a[:n] = tmp[:n]


@numba.njit(nogil=True)
def _query_range(indptr, indices, start, stop, exclude, K, L, rangebits, seeds,
                 table, slots, counters, R, k, min_count, out_ids, out_counts):
    """Answer queries ``start..stop`` into rows of ``out_*`` (padded with -1
    and 0). ``exclude[i]`` is an id to drop for query i, or -1. Returns the
    first empty query row, or -1.

    Work per query is linear in the L*R candidates: radix sort, run-length
    count, then a stable counting sort on counts so
    equal counts stay in ascending id order.
    """
    nbins = K * L
    tsize = np.int64(1) << rangebits
    bins = np.empty(nbins, dtype=np.uint64)
    sig = np.empty(nbins, dtype=np.uint32)
    addr = np.empty(L, dtype=np.int64)
    seen = np.empty(L, dtype=np.int64)
    buf = np.empty(L * R, dtype=np.int32)
    tmp = np.empty(L * R, dtype=np.int32)
    hist = np.empty(257, dtype=np.int64)
    run_ids = np.empty(L * R, dtype=np.int64)
    run_counts = np.empty(L * R, dtype=np.int64)
    by_count = np.empty(L * R + 2, dtype=np.int64)
    width = out_ids.shape[1]
    for i in range(start, stop):
        if indptr[i + 1] == indptr[i]:
            return i
        _doph(indices, indptr[i], indptr[i + 1], nbins, seeds, bins, sig)
        _addresses(sig, K, L, rangebits, seeds[3], addr)
        nseen = 0
        n = 0
        hi = 0
        for t in range(L):
            r = np.int64(table[t * tsize + addr[t]])
            if r < 0:
                continue
            dup = False
            for s in range(nseen):
                if seen[s] == r:
                    dup = True
                    break
            if dup:
                continue
            seen[nseen] = r
            nseen += 1
            for s in range(min(counters[r], R)):
                v = slots[r, s] - 1
                buf[n] = v
                hi = max(hi, v)
                n += 1
        _radix_sort(buf, n, hi, tmp, hist)
        m = 0
        j = 0
        top = 0
        while j < n:
            v = buf[j]
            c = 1
            while j + c < n and buf[j + c] == v:
                c += 1
            j += c
            if v != exclude[i] and c >= min_count:
                run_ids[m] = v
                run_counts[m] = c
                top = max(top, c)
                m += 1
        # by_count[b] ends up as the output offset of count top - b
        by_count[:top + 2] = 0
        for s in range(m):
            by_count[top - run_counts[s] + 1] += 1
        for b in range(1, top + 2):
            by_count[b] += by_count[b - 1]
        for s in range(width):
            out_ids[i, s] = -1
            out_counts[i, s] = 0
        for s in range(m):
            b = top - run_counts[s]
            pos = by_count[b]
            by_count[b] += 1
            if pos < width:
                out_ids[i, pos] = run_ids[s]
                out_counts[i, pos] = run_counts[s]
    return -1


@dataclass
class KnnGraph:
    """Per-query neighbor ids and counts, padded with -1 / 0 to width k."""

    ids: np.ndarray
    counts: np.ndarray

    def __len__(self) -> int:
        return self.ids.shape[0]

    def __getitem__(self, i: int) -> QueryResult:
        keep = self.ids[i] >= 0
        return QueryResult(self.ids[i][keep], self.counts[i][keep])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnnGraph):
            return NotImplemented
        return np.array_equal(self.ids, other.ids) and np.array_equal(self.counts, other.counts)

    def write_tsv(self, stream: TextIO) -> None:
        """One line per id: ``id<TAB>neighbor:count,neighbor:count,...``."""
        for i in range(len(self)):
            row = self[i]
            stream.write(f"{i}\t" + ",".join(f"{a}:{c}" for a, c in row.neighbors) + "\n")

    def write_csv(self, stream: TextIO) -> None:
        """Adjacency list as ``source,target,count,rank`` rows."""
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["source", "target", "count", "rank"])
        for i in range(len(self)):
            for rank, (a, c) in enumerate(self[i].neighbors):
                w.writerow([i, a, c, rank])


def query_batch(index: ReservoirIndex, queries, k: int, exclude=None, workers: int = 1,
                min_count: int = 1) -> KnnGraph:
    """Answer every row of the ``queries`` Dataset; ``exclude`` optionally
    gives one id per query to drop (-1 for none)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    n = len(queries)
    excl = (np.full(n, -1, dtype=np.int64) if exclude is None
            else np.asarray(exclude, dtype=np.int64))
    if excl.shape != (n,):
        raise ValueError("exclude must give one id per query")
    ids = np.empty((n, k), dtype=np.int64)
    counts = np.empty((n, k), dtype=np.int64)
    h = index.config.hash
    seeds = h.seeds()
    bounds = np.linspace(0, n, workers + 1).astype(np.int64)

    def work(w):
        return _query_range(queries.indptr, queries.indices, bounds[w], bounds[w + 1], excl,
                            h.K, h.L, h.rangebits, seeds, index.table, index.slots,
                            index.counters, index.R, k, min_count, ids, counts)

    if workers == 1:
        bad = [work(0)]
    else:
        with ThreadPoolExecutor(workers) as pool:
            bad = list(pool.map(work, range(workers)))
    failed = [b for b in bad if b >= 0]
    if failed:
        raise EmptyVectorError(min(failed))
    return KnnGraph(ids, counts)


def knn_graph(index: ReservoirIndex, data, k: int, workers: int = 1,
              min_count: int = 1) -> KnnGraph:
    """Approximate k-NN graph of the indexed dataset, self excluded."""
    return query_batch(index, data, k, exclude=data.ids, workers=workers, min_count=min_count)
