"""Hash tables of fixed-size reservoirs over a shared reservoir pool.

Each table cell lazily binds to one reservoir in a pool of
``ceil(F * L * 2**rangebits)`` reservoirs. A table first consumes its own
local allotment of ``floor(local_share * F * 2**rangebits)`` reservoirs and
afterwards binds cells to uniformly random pool reservoirs, which may
already serve other cells. Reservoirs follow Algorithm R: fill the first R
slots, then replace slot ``j ~ U{0..c}`` when ``j < R``.

Concurrent adds take a spinlock per reservoir and resolve first binds of a
cell with compare-and-swap, so no global lock serializes the build.
"""

from __future__ import annotations

import io
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from ._atomics import atomic_store, compare_and_swap, fetch_add
from ._hashing import RandomStream, split_seed, uniform_int
from .doph import EmptyVectorError, HashParams, _addresses, _doph

FORMAT_NAME = "reservoir-lsh-index"
FORMAT_VERSION = 1
UNBOUND = -1
BINDING = -2


@dataclass(frozen=True)
class IndexConfig:
    hash: HashParams = field(default_factory=HashParams)
    R: int = 32
    F: float = 1.0
    local_share: float = 1.0

    def __post_init__(self) -> None:
        if self.R < 1:
            raise ValueError("R must be >= 1")
        if self.R < 5:
            warnings.warn(f"reservoir size R={self.R} is below 5; recall guarantees weaken",
                          stacklevel=3)
        if not 0.0 < self.F <= 1.0:
            raise ValueError("F must lie in (0, 1]")
        if not 0.0 <= self.local_share <= 1.0:
            raise ValueError("local_share must lie in [0, 1]")
        if self.pool_size < 1:
            raise ValueError("F too small: empty reservoir pool")

    @classmethod
    def make(cls, K=4, L=32, rangebits=15, R=32, F=1.0, seed=0, local_share=1.0) -> "IndexConfig":
        return cls(HashParams(K=K, L=L, rangebits=rangebits, seed=seed), R=R, F=F,
                   local_share=local_share)

    @property
    def table_size(self) -> int:
        return 1 << self.hash.rangebits

    @property
    def local_allotment(self) -> int:
        return math.floor(self.local_share * self.F * self.table_size)

    @property
    def pool_size(self) -> int:
        return math.ceil(self.F * self.hash.L * self.table_size)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "IndexConfig":
        d = dict(d)
        return cls(HashParams(**d.pop("hash")), **d)


@numba.njit(nogil=True)
def _insert(slots, counters, locks, r, ident, R, rng):
    while compare_and_swap(locks, r, np.int32(0), np.int32(1)) != 0:
        pass
    c = counters[r]
    if c < R:
        slots[r, c] = ident + 1
    else:
        j = uniform_int(rng, c + 1)
        if j < R:
            slots[r, j] = ident + 1
    counters[r] = c + 1
    atomic_store(locks, r, np.int32(0))


@numba.njit(nogil=True)
def _bind(table, cell, t, local_used, allot, pool_size, rng):
    cur = fetch_add(table, cell, np.int32(0))
    while True:
        if cur >= 0:
            return cur
        if cur == UNBOUND:
            prev = compare_and_swap(table, cell, np.int32(UNBOUND), np.int32(BINDING))
            if prev == UNBOUND:
                k = fetch_add(local_used, t, np.int64(1))
                if k < allot:
                    r = t * allot + k
                else:
                    r = uniform_int(rng, pool_size)
                atomic_store(table, cell, np.int32(r))
                return np.int32(r)
            cur = prev
        else:
            cur = fetch_add(table, cell, np.int32(0))


@numba.njit(nogil=True)
def _add_range(indptr, indices, start, stop, first_id, K, L, rangebits, seeds,
               table, local_used, allot, pool_size, slots, counters, locks, R, rng):
    """Add rows ``start..stop`` with ids ``first_id + row``; returns the first
    row that could not be hashed, or -1."""
    nbins = K * L
    tsize = np.int64(1) << rangebits
    bins = np.empty(nbins, dtype=np.uint64)
    sig = np.empty(nbins, dtype=np.uint32)
    addr = np.empty(L, dtype=np.int64)
    for i in range(start, stop):
        if indptr[i + 1] == indptr[i]:
            return i
        _doph(indices, indptr[i], indptr[i + 1], nbins, seeds, bins, sig)
        _addresses(sig, K, L, rangebits, seeds[3], addr)
        ident = np.int32(first_id + i)
        for t in range(L):
            r = _bind(table, t * tsize + addr[t], t, local_used, allot, pool_size, rng)
            _insert(slots, counters, locks, r, ident, R, rng)
    return -1


@numba.njit(nogil=True)
def _stream_trials(m, R, trials, state):
    """Stream ids ``0..m-1`` through a fresh reservoir ``trials`` times and
    count how often each id is retained."""
    hits = np.zeros(m, dtype=np.int64)
    slots = np.zeros((1, R), dtype=np.int32)
    counters = np.zeros(1, dtype=np.int64)
    locks = np.zeros(1, dtype=np.int32)
    for _ in range(trials):
        slots[0, :] = 0
        counters[0] = 0
        for ident in range(m):
            _insert(slots, counters, locks, 0, ident, R, state)
        for s in range(min(m, R)):
            hits[slots[0, s] - 1] += 1
    return hits


class Reservoir:
    """A standalone fixed-size reservoir backed by the index kernels."""

    def __init__(self, R: int):
        if R < 1:
            raise ValueError("R must be >= 1")
        self.R = R
        self._slots = np.zeros((1, R), dtype=np.int32)
        self._counters = np.zeros(1, dtype=np.int64)
        self._locks = np.zeros(1, dtype=np.int32)

    def insert(self, ident: int, rng: RandomStream) -> "Reservoir":
        _insert(self._slots, self._counters, self._locks, 0, ident, self.R, rng.state)
        return self

    @property
    def counter(self) -> int:
        return int(self._counters[0])

    @property
    def ids(self) -> np.ndarray:
        return self._slots[0, :min(self.counter, self.R)].astype(np.int64) - 1


def retention_counts(m: int, R: int, trials: int, seed: int = 0) -> np.ndarray:
    """How often each of ``m`` streamed ids survives, over ``trials`` runs."""
    return _stream_trials(m, R, trials, RandomStream(seed).state)


class ReservoirIndex:
    """L tables of lazily bound reservoir references over a shared pool.

    Identifiers are stored as ``id + 1`` in int32 slots so that freshly
    zeroed (and therefore untouched) pool pages read as empty.
    """

    def __init__(self, config: IndexConfig):
        self.config = config
        L, T = config.hash.L, config.table_size
        self.table = np.full(L * T, UNBOUND, dtype=np.int32)
        self.slots = np.zeros((config.pool_size, config.R), dtype=np.int32)
        self.counters = np.zeros(config.pool_size, dtype=np.int64)
        self.local_used = np.zeros(L, dtype=np.int64)
        self.count = 0
        self._locks = np.zeros(config.pool_size, dtype=np.int32)
        self._seeds = config.hash.seeds()
        self._stream = RandomStream(int(split_seed(config.hash.seed, 99)))

    @property
    def L(self) -> int:
        return self.config.hash.L

    @property
    def R(self) -> int:
        return self.config.R

    def cell(self, table: int, address: int) -> int:
        if not 0 <= table < self.L:
            raise IndexError(f"table {table} out of range")
        if not 0 <= address < self.config.table_size:
            raise IndexError(f"address {address} out of range")
        return table * self.config.table_size + address

    def binding(self, table: int, address: int) -> int:
        """Pool reservoir bound at a cell, or -1."""
        return int(self.table[self.cell(table, address)])

    def bind(self, table: int, address: int, rng: RandomStream | None = None) -> int:
        rng = rng or self._stream
        return int(_bind(self.table, self.cell(table, address), table, self.local_used,
                         self.config.local_allotment, self.config.pool_size, rng.state))

    def reservoir_ids(self, r: int) -> np.ndarray:
        n = min(int(self.counters[r]), self.R)
        return self.slots[r, :n].astype(np.int64) - 1

    def bucket(self, table: int, address: int) -> np.ndarray:
        r = self.binding(table, address)
        return np.empty(0, dtype=np.int64) if r < 0 else self.reservoir_ids(r)

    def add(self, ident: int, x, rng: RandomStream | None = None) -> "ReservoirIndex":
        """Insert one point. The vector itself is not retained."""
        indices = np.asarray(getattr(x, "indices", x), dtype=np.int64)
        if indices.size == 0:
            raise EmptyVectorError(ident)
        if not 0 <= ident < 2**31 - 1:
            raise ValueError("identifiers must fit in 31 bits")
        indptr = np.array([0, indices.size], dtype=np.int64)
        self._run(indptr, indices, 0, 1, ident, (rng or self._stream).state)
        self.count += 1
        return self

    def add_all(self, data, workers: int = 1, first_id: int = 0) -> "ReservoirIndex":
        """Insert every row of ``data`` with ids ``first_id + row``, sharding
        contiguous row ranges over ``workers`` threads."""
        if workers < 1:
            raise ValueError("workers must be >= 1")
        n = len(data)
        if first_id + n >= 2**31:
            raise ValueError("identifiers must fit in 31 bits")
        bounds = np.linspace(0, n, workers + 1).astype(np.int64)
        streams = [RandomStream(int(split_seed(self.config.hash.seed, 100 + w)))
                   for w in range(workers)]

        def work(w):
            return self._run(data.indptr, data.indices, bounds[w], bounds[w + 1],
                             first_id, streams[w].state)

        if workers == 1:
            bad = [work(0)]
        else:
            with ThreadPoolExecutor(workers) as pool:
                bad = list(pool.map(work, range(workers)))
        failed = [b for b in bad if b >= 0]
        if failed:
            raise EmptyVectorError(first_id + min(failed))
        self.count += n
        return self

    def _run(self, indptr, indices, start, stop, first_id, state) -> int:
        h = self.config.hash
        return int(_add_range(indptr, indices, start, stop, first_id, h.K, h.L, h.rangebits,
                              self._seeds, self.table, self.local_used,
                              self.config.local_allotment, self.config.pool_size,
                              self.slots, self.counters, self._locks, self.R, state))

    # memory accounting

    @property
    def pool_bytes(self) -> int:
        return self.slots.nbytes + self.counters.nbytes

    def bound_reservoirs(self) -> int:
        return int(np.unique(self.table[self.table >= 0]).size)

    @property
    def allocated_bytes(self) -> int:
        per = self.slots.itemsize * self.R + self.counters.itemsize
        return self.bound_reservoirs() * per

    # persistence

    def save(self, path: str | os.PathLike | io.IOBase) -> None:
        meta = {"format": FORMAT_NAME, "version": FORMAT_VERSION,
                "config": self.config.to_dict(), "count": self.count}
        np.savez_compressed(path, meta=np.array(json.dumps(meta)), table=self.table,
                            slots=self.slots, counters=self.counters,
                            local_used=self.local_used, stream=self._stream.state)

    @classmethod
    def load(cls, path: str | os.PathLike | io.IOBase) -> "ReservoirIndex":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("format") != FORMAT_NAME:
                raise ValueError("not a reservoir index file")
            if meta.get("version") != FORMAT_VERSION:
                raise ValueError(f"unsupported index format version {meta.get('version')}")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                index = cls.__new__(cls)
                index.config = IndexConfig.from_dict(meta["config"])
            index.table = z["table"]
            index.slots = z["slots"]
            index.counters = z["counters"]
            index.local_used = z["local_used"]
            index.count = int(meta["count"])
            index._stream = RandomStream()
            index._stream.state[:] = z["stream"]
        index._locks = np.zeros(index.config.pool_size, dtype=np.int32)
        index._seeds = index.config.hash.seeds()
        expected = (index.L * index.config.table_size, (index.config.pool_size, index.R))
        if index.table.size != expected[0] or index.slots.shape != expected[1]:
            raise ValueError("index arrays do not match stored config")
        return index

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ReservoirIndex):
            return NotImplemented
        return (self.config == other.config and self.count == other.count
                and np.array_equal(self.table, other.table)
                and np.array_equal(self.slots, other.slots)
                and np.array_equal(self.counters, other.counters)
                and np.array_equal(self.local_used, other.local_used)
                and np.array_equal(self._stream.state, other._stream.state))

    __hash__ = None


def build(data, config: IndexConfig, workers: int = 1) -> ReservoirIndex:
    return ReservoirIndex(config).add_all(data, workers)
