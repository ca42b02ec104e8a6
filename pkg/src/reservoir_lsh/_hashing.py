"""Seeded 64-bit hashing and random streams shared by the jitted kernels."""

import numba
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
MASK32 = np.uint64(0xFFFFFFFF)
U30 = np.uint64(30)
U27 = np.uint64(27)
U31 = np.uint64(31)
U32 = np.uint64(32)


@numba.njit(inline="always", nogil=True)
def mix64(z):
    z = (z ^ (z >> U30)) * MIX1
    z = (z ^ (z >> U27)) * MIX2
    return z ^ (z >> U31)


@numba.njit(inline="always", nogil=True)
def reduce_range(h, n):
    """Map the top 32 bits of ``h`` onto ``[0, n)`` by multiply-shift."""
    return np.int64(((h >> U32) * np.uint64(n)) >> U32)


@numba.njit(inline="always", nogil=True)
def next_random(state):
    """Advance a splitmix64 stream held in ``state[0]``."""
    state[0] += GOLDEN
    return mix64(state[0])


@numba.njit(inline="always", nogil=True)
def uniform_int(state, n):
    # bias is n / 2**64, far below anything a test can resolve
    return np.int64(next_random(state) % np.uint64(n))


_M64 = (1 << 64) - 1


def split_seed(root: int, counter: int) -> np.uint64:
    """Derive an independent 64-bit seed from ``root`` by counter."""
    z = (root + (counter + 1) * int(GOLDEN)) & _M64
    z = ((z ^ (z >> 30)) * int(MIX1)) & _M64
    z = ((z ^ (z >> 27)) * int(MIX2)) & _M64
    return np.uint64(z ^ (z >> 31))


class RandomStream:
    """Seeded splitmix64 stream whose state the kernels advance in place."""

    def __init__(self, seed: int = 0):
        self.state = np.array([split_seed(seed, 0x5EED)], dtype=np.uint64)

    def randint(self, n: int) -> int:
        return int(uniform_int(self.state, n))
