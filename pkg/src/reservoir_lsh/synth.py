"""Planted-cluster generator for sparse binary data.

Cluster ``c`` owns the index range ``[c*W, (c+1)*W)`` with ``W = D // clusters``
and a fixed center of ``nnz`` indices inside it. A member keeps
``s = round(overlap * nnz)`` center indices chosen at random and fills the
remaining ``nnz - s`` from the rest of its range. Members of different
clusters therefore never share an index.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import hypergeom

from .sparse import Dataset


def _check(n, dim, nnz, clusters, overlap):
    if min(n, dim, nnz, clusters) < 1:
        raise ValueError("n, dim, nnz and clusters must be positive")
    if not 0.0 <= overlap <= 1.0:
        raise ValueError("overlap must lie in [0, 1]")
    if nnz > dim:
        raise ValueError("nnz exceeds dimension")
    width = dim // clusters
    shared = round(overlap * nnz)
    if width - nnz < nnz - shared:
        raise ValueError(f"infeasible: cluster range {width} too narrow for nnz={nnz} "
                         f"at overlap={overlap}")
    return width, shared


def planted_clusters(n: int, dim: int, nnz: int, clusters: int, overlap: float,
                     seed: int = 0) -> tuple[Dataset, np.ndarray]:
    """Return the dataset and each point's cluster label (round-robin)."""
    width, shared = _check(n, dim, nnz, clusters, overlap)
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % clusters
    rows = []
    centers = {}
    for c in labels:
        if c not in centers:
            perm = rng.permutation(width) + c * width
            centers[c] = (perm[:nnz], perm[nnz:])
        center, rest = centers[c]
        keep = rng.choice(center, shared, replace=False)
        noise = rng.choice(rest, nnz - shared, replace=False)
        rows.append(np.sort(np.concatenate([keep, noise])))
    indptr = np.arange(n + 1, dtype=np.int64) * nnz
    return Dataset(indptr, np.concatenate(rows), dim), labels


def expected_within_jaccard(dim: int, nnz: int, clusters: int, overlap: float) -> float:
    """Exact mean Jaccard of two distinct members of one cluster.

    Shared-center overlap and noise overlap are independent hypergeometric
    counts; the result sums ``i / (2*nnz - i)`` over their convolution.
    """
    width, shared = _check(2, dim, nnz, clusters, overlap)
    noise = nnz - shared
    a = hypergeom(nnz, shared, shared).pmf(np.arange(shared + 1))
    b = hypergeom(width - nnz, noise, noise).pmf(np.arange(noise + 1))
    inter = np.convolve(a, b)
    i = np.arange(inter.size)
    return float(np.sum(inter * i / (2 * nnz - i)))


def with_hot_duplicates(data: Dataset, fraction: float = 0.5, seed: int = 0) -> Dataset:
    """Replace a ``fraction`` of the rows by copies of a single row."""
    rng = np.random.default_rng(seed)
    n = len(data)
    hot = set(rng.choice(n, int(round(fraction * n)), replace=False).tolist())
    src = data[int(rng.integers(n))]
    rows = [src if i in hot else data[i] for i in range(n)]
    return Dataset.from_vectors(rows, data.dimension)


def similarity_ladder(nnz: int, targets, background: int = 0, dim: int = 10**7,
                      seed: int = 0) -> tuple[np.ndarray, Dataset, np.ndarray]:
    """A query plus one neighbor per target Jaccard, then ``background``
    random points.

    Neighbor ``i`` shares ``a = round(2*nnz*J / (1 + J))`` of the query's
    indices and fills the rest with fresh ones, so its exact Jaccard
    ``a / (2*nnz - a)`` (returned) sits within rounding of the target.
    """
    rng = np.random.default_rng(seed)
    targets = np.asarray(targets, dtype=np.float64)
    if np.any((targets < 0) | (targets > 1)):
        raise ValueError("targets must lie in [0, 1]")
    shared = np.rint(2 * nnz * targets / (1 + targets)).astype(np.int64)
    fresh = int((nnz - shared).sum()) + background * nnz
    if nnz + fresh > dim:
        raise ValueError("dimension too small for the requested ladder")
    pool = rng.choice(dim, nnz + fresh, replace=False)
    q, rest = pool[:nnz], pool[nnz:]
    rows, pos = [], 0
    for a in shared:
        rows.append(np.sort(np.concatenate([rng.choice(q, a, replace=False),
                                            rest[pos:pos + nnz - a]])))
        pos += nnz - a
    for _ in range(background):
        rows.append(np.sort(rest[pos:pos + nnz]))
        pos += nnz
    return np.sort(q), Dataset.from_vectors(rows, dim), shared / (2 * nnz - shared)
