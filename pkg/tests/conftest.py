import numpy as np
import pytest

from reservoir_lsh.sparse import Dataset
from reservoir_lsh.synth import planted_clusters

# desk-scale planted dataset shared by the acceptance checks
DESK = dict(n=10_000, dim=100_000, nnz=50, clusters=250, overlap=0.8, seed=0)


@pytest.fixture(scope="session")
def desk():
    data, labels = planted_clusters(**DESK)
    return data, labels


@pytest.fixture(scope="session")
def small_planted():
    return planted_clusters(n=400, dim=20_000, nnz=40, clusters=20, overlap=0.8, seed=3)


def random_dataset(n, dim, nnz, seed):
    rng = np.random.default_rng(seed)
    return Dataset.from_vectors([rng.choice(dim, nnz, replace=False) for _ in range(n)], dim)


def planted_pair(jaccard, size=100, dim=10**7, seed=0):
    """Two vectors with exactly the given Jaccard: |x & y| = a, |x \\ y| = |y \\ x| = b."""
    from fractions import Fraction

    f = Fraction(jaccard).limit_denominator(20)
    # a / (a + 2b) = p/q  ->  a = p*t, b = (q - p)*t/2
    p, q = f.numerator, f.denominator
    t = max(1, size // q) * 2
    a, b = p * t, (q - p) * t // 2
    rng = np.random.default_rng(seed)
    pool = rng.choice(dim, a + 2 * b, replace=False)
    x = np.sort(pool[:a + b])
    y = np.sort(np.concatenate([pool[:a], pool[a + b:]]))
    return x, y
