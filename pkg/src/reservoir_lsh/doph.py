"""Densified one-permutation minwise hashing and table addressing.

Every nonzero index is hashed once: the top half of a 64-bit hash picks one
of ``K*L`` bins and the low 32 bits are its value; each bin keeps its
minimum. Bins left empty are filled by walking a seeded, bin-specific probe
sequence until an originally non-empty bin is hit, copying that value offset
by the probe count. For two vectors the first probe that is non-empty in
their union decides the outcome, so the per-bin collision probability stays
the Jaccard similarity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ._hashing import GOLDEN, MASK32, U32, mix64, reduce_range, split_seed

EMPTY_BIN = np.uint64(1) << U32
PROBE_STRIDE = np.uint64(0x632BE59BD9B4E019)
VALUE_STRIDE = np.uint64(0x9E3779B9)


@dataclass(frozen=True)
class HashParams:
    K: int = 4
    L: int = 32
    rangebits: int = 15
    seed: int = 0
    max_hashes: int = 1 << 16

    def __post_init__(self) -> None:
        if self.K < 1 or self.L < 1:
            raise ValueError("K and L must be >= 1")
        if not 1 <= self.rangebits <= 31:
            raise ValueError("rangebits must be in [1, 31]")
        if self.K * self.L > self.max_hashes:
            raise ValueError(f"K*L={self.K * self.L} exceeds cap {self.max_hashes}")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def num_hashes(self) -> int:
        return self.K * self.L

    def seeds(self) -> np.ndarray:
        """Per-run constants: element multiplier, element offset, probe seed,
        address seed."""
        s = [split_seed(self.seed, c) for c in range(4)]
        s[0] |= np.uint64(1)
        return np.array(s, dtype=np.uint64)


@numba.njit(nogil=True)
def _doph(indices, start, stop, nbins, seeds, bins, out):
    """Hash ``indices[start:stop]`` into ``out`` (length nbins, uint32).

    ``bins`` is uint64 scratch of length nbins. Returns the number of hash
    evaluations performed.
    """
    a = seeds[0]
    b = seeds[1]
    probe_seed = seeds[2]
    for j in range(nbins):
        bins[j] = EMPTY_BIN
    for p in range(start, stop):
        h = mix64(np.uint64(indices[p]) * a + b)
        j = reduce_range(h, nbins)
        v = h & MASK32
        if v < bins[j]:
            bins[j] = v
    evals = stop - start
    for j in range(nbins):
        if bins[j] != EMPTY_BIN:
            out[j] = np.uint32(bins[j])
            continue
        base = probe_seed + np.uint64(j) * GOLDEN
        t = np.uint64(0)
        while True:
            t += np.uint64(1)
            evals += 1
            c = reduce_range(mix64(base + t * PROBE_STRIDE), nbins)
            if bins[c] != EMPTY_BIN:
                out[j] = np.uint32((bins[c] + t * VALUE_STRIDE) & MASK32)
                break
    return evals


@numba.njit(nogil=True)
def _addresses(sig, K, L, rangebits, addr_seed, out):
    shift = np.uint64(64 - rangebits)
    for i in range(L):
        acc = mix64(addr_seed ^ (np.uint64(i + 1) * GOLDEN))
        for j in range(i * K, (i + 1) * K):
            acc = mix64((acc ^ np.uint64(sig[j])) * GOLDEN)
        out[i] = np.int64(acc >> shift)


@numba.njit(nogil=True)
def _signatures(indptr, indices, start, stop, nbins, seeds, out):
    bins = np.empty(nbins, dtype=np.uint64)
    for i in range(start, stop):
        if indptr[i + 1] == indptr[i]:
            return i
        _doph(indices, indptr[i], indptr[i + 1], nbins, seeds, bins, out[i])
    return -1


class EmptyVectorError(ValueError):
    def __init__(self, ident: int | None = None):
        where = "" if ident is None else f" (id {ident})"
        super().__init__(f"cannot hash empty vector{where}")
        self.ident = ident


def doph_signature(x, p: HashParams, return_evaluations: bool = False):
    """K*L densified minwise hashes of ``x``, table-major (table i owns
    ``[i*K, (i+1)*K)``)."""
    indices = np.asarray(getattr(x, "indices", x), dtype=np.int64)
    if indices.size == 0:
        raise EmptyVectorError()
    out = np.empty(p.num_hashes, dtype=np.uint32)
    bins = np.empty(p.num_hashes, dtype=np.uint64)
    evals = _doph(indices, 0, indices.size, p.num_hashes, p.seeds(), bins, out)
    return (out, int(evals)) if return_evaluations else out


def table_addresses(s: np.ndarray, p: HashParams) -> np.ndarray:
    """The L table addresses, each in ``[0, 2**rangebits)``."""
    s = np.asarray(s, dtype=np.uint32)
    if s.size != p.num_hashes:
        raise ValueError(f"signature has {s.size} hashes, expected {p.num_hashes}")
    out = np.empty(p.L, dtype=np.int64)
    _addresses(s, p.K, p.L, p.rangebits, p.seeds()[3], out)
    return out


def signatures(data, p: HashParams) -> np.ndarray:
    """Signatures of every vector in a Dataset as an ``(N, K*L)`` array."""
    out = np.empty((len(data), p.num_hashes), dtype=np.uint32)
    bad = _signatures(data.indptr, data.indices, 0, len(data), p.num_hashes, p.seeds(), out)
    if bad >= 0:
        raise EmptyVectorError(int(bad))
    return out
