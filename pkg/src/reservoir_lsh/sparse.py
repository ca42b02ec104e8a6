"""Sparse binary vectors, libsvm ingestion, exact similarities and the
brute-force ground-truth oracle."""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

METRICS = ("jaccard", "cosine")


class LibsvmParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class SimilarityCounter:
    """Counts exact similarity evaluations; lets tests prove a code path
    never scores candidates."""

    def __init__(self) -> None:
        self.count = 0

    def add(self, n: int = 1) -> None:
        self.count += n

    def reset(self) -> None:
        self.count = 0


similarity_evaluations = SimilarityCounter()


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Binary vector stored as its strictly increasing nonzero indices."""

    indices: np.ndarray

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1:
            raise ValueError("indices must be one-dimensional")
        if idx.size and (idx[0] < 0 or np.any(np.diff(idx) <= 0)):
            raise ValueError("indices must be non-negative and strictly increasing")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_iterable(cls, items: Iterable[int]) -> "SparseVector":
        return cls(np.unique(np.fromiter(items, dtype=np.int64)))

    def __len__(self) -> int:
        return int(self.indices.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.indices, other.indices)

    def __repr__(self) -> str:
        return f"SparseVector({self.indices.tolist()})"


@dataclass
class Dataset:
    """CSR-packed collection of binary vectors with ids ``0..N-1``."""

    indptr: np.ndarray
    indices: np.ndarray
    dimension: int = field(default=-1)

    def __post_init__(self) -> None:
        self.indptr = np.asarray(self.indptr, dtype=np.int64)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.indptr.ndim != 1 or self.indptr.size < 1 or self.indptr[0] != 0:
            raise ValueError("indptr must start at 0")
        if self.indptr[-1] != self.indices.size:
            raise ValueError("indptr does not match indices")
        observed = int(self.indices.max()) + 1 if self.indices.size else 0
        if self.dimension < 0:
            self.dimension = observed
        elif observed > self.dimension:
            raise ValueError(f"index {observed - 1} outside dimension {self.dimension}")

    @classmethod
    def from_vectors(cls, vectors: Sequence[SparseVector | Iterable[int]],
                     dimension: int | None = None) -> "Dataset":
        rows = [v if isinstance(v, SparseVector) else SparseVector.from_iterable(v)
                for v in vectors]
        lengths = np.fromiter((len(v) for v in rows), dtype=np.int64, count=len(rows))
        indptr = np.concatenate([[0], np.cumsum(lengths)])
        indices = (np.concatenate([v.indices for v in rows])
                   if rows else np.empty(0, dtype=np.int64))
        return cls(indptr, indices, -1 if dimension is None else dimension)

    def __len__(self) -> int:
        return self.indptr.size - 1

    def __getitem__(self, i: int) -> SparseVector:
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i %= len(self)
        return SparseVector(self.indices[self.indptr[i]:self.indptr[i + 1]])

    def __iter__(self) -> Iterator[SparseVector]:
        for i in range(len(self)):
            yield self[i]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self), dtype=np.int64)

    @property
    def nnz(self) -> np.ndarray:
        return np.diff(self.indptr)

    def subset(self, ids: Sequence[int]) -> "Dataset":
        return Dataset.from_vectors([self[int(i)] for i in ids], self.dimension)

    def to_csr(self, dimension: int | None = None) -> sp.csr_matrix:
        d = max(self.dimension, dimension or 0, 1)
        data = np.ones(self.indices.size, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(len(self), d))


def parse_libsvm(source: TextIO | Iterable[str], dimension: int | None = None,
                 one_based: bool = True) -> Dataset:
    """Read libsvm lines into a binary Dataset.

    Labels and feature values are discarded except that a feature whose value
    parses as zero is dropped. Empty lines are skipped; a trailing ``#``
    comment is ignored.
    """
    offset = 1 if one_based else 0
    rows: list[np.ndarray] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        feats = []
        for tok in tokens[1:]:
            name, sep, value = tok.partition(":")
            if not sep:
                raise LibsvmParseError(lineno, f"missing colon in token {tok!r}")
            try:
                idx = int(name)
            except ValueError:
                raise LibsvmParseError(lineno, f"non-integer index {name!r}") from None
            try:
                val = float(value)
            except ValueError:
                raise LibsvmParseError(lineno, f"non-numeric value {value!r}") from None
            if idx < offset:
                raise LibsvmParseError(lineno, f"index {idx} out of range")
            if val != 0.0:
                feats.append(idx - offset)
        rows.append(np.unique(np.asarray(feats, dtype=np.int64)))
    lengths = np.fromiter((r.size for r in rows), dtype=np.int64, count=len(rows))
    indptr = np.concatenate([[0], np.cumsum(lengths)])
    indices = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    return Dataset(indptr, indices, -1 if dimension is None else dimension)


def read_libsvm(path: str | os.PathLike, dimension: int | None = None) -> Dataset:
    with open(path, encoding="utf-8", newline=None) as fh:
        return parse_libsvm(fh, dimension)


def write_libsvm(data: Dataset, stream: TextIO, labels: Sequence[int] | None = None) -> None:
    for i, vec in enumerate(data):
        label = 0 if labels is None else labels[i]
        feats = " ".join(f"{j + 1}:1" for j in vec.indices.tolist())
        stream.write(f"{label} {feats}\n" if feats else f"{label}\n")


def dumps_libsvm(data: Dataset) -> str:
    buf = io.StringIO()
    write_libsvm(data, buf)
    return buf.getvalue()


def _intersection(x: SparseVector, y: SparseVector) -> int:
    return int(np.intersect1d(x.indices, y.indices, assume_unique=True).size)


def jaccard(x: SparseVector, y: SparseVector) -> float:
    similarity_evaluations.add()
    inter = _intersection(x, y)
    union = len(x) + len(y) - inter
    return inter / union if union else 0.0


def cosine(x: SparseVector, y: SparseVector) -> float:
    similarity_evaluations.add()
    if not len(x) or not len(y):
        return 0.0
    return _intersection(x, y) / math.sqrt(len(x) * len(y))


def _scores(inter: np.ndarray, qsize: np.ndarray, sizes: np.ndarray, metric: str) -> np.ndarray:
    if metric == "jaccard":
        union = qsize + sizes - inter
        return np.divide(inter, union, out=np.zeros(inter.shape), where=union > 0)
    if metric == "cosine":
        denom = np.sqrt(qsize * sizes)
        return np.divide(inter, denom, out=np.zeros(inter.shape), where=denom > 0)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def similarity_matrix(queries: Dataset, data: Dataset, metric: str = "cosine") -> np.ndarray:
    """Dense ``len(queries) x len(data)`` matrix of exact similarities."""
    d = max(queries.dimension, data.dimension, 1)
    inter = (queries.to_csr(d) @ data.to_csr(d).T).toarray()
    similarity_evaluations.add(inter.size)
    qs = queries.nnz.astype(np.float64)[:, None]
    ds = data.nnz.astype(np.float64)[None, :]
    return _scores(inter, qs, ds, metric)


def _rank(scores: np.ndarray, k: int, exclude: int | None) -> list[tuple[int, float]]:
    ids = np.arange(scores.size)
    if exclude is not None and 0 <= exclude < scores.size:
        keep = ids != exclude
        ids, scores = ids[keep], scores[keep]
    order = np.lexsort((ids, -scores))[:k]
    return [(int(ids[o]), float(scores[o])) for o in order]


def brute_force_topk(query: SparseVector, data: Dataset, k: int, metric: str = "cosine",
                     exclude: int | None = None) -> list[tuple[int, float]]:
    """Exact top-``k`` of ``data`` against ``query``, best first, ties by id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(data) == 0:
        return []
    q = Dataset.from_vectors([query], max(data.dimension, len(query) and int(query.indices[-1]) + 1))
    return _rank(similarity_matrix(q, data, metric)[0], k, exclude)


def brute_force_topk_batch(query_ids: Sequence[int], data: Dataset, k: int,
                           metric: str = "cosine", exclude_self: bool = True,
                           chunk: int = 512) -> list[list[tuple[int, float]]]:
    """``brute_force_topk`` for dataset members, chunked over queries."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out: list[list[tuple[int, float]]] = []
    query_ids = [int(i) for i in query_ids]
    for start in range(0, len(query_ids), chunk):
        block = query_ids[start:start + chunk]
        sims = similarity_matrix(data.subset(block), data, metric)
        for row, qid in zip(sims, block):
            out.append(_rank(row, k, qid if exclude_self else None))
    return out
