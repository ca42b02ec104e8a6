import io
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import spearmanr

from reservoir_lsh.doph import EmptyVectorError, doph_signature, signatures, table_addresses
from reservoir_lsh.index import IndexConfig, ReservoirIndex, build
from reservoir_lsh.query import (aggregate, count_frequencies, k_select, knn_graph, query,
                                 query_batch)
from reservoir_lsh.sparse import Dataset
from reservoir_lsh.synth import similarity_ladder, with_hot_duplicates

from conftest import planted_pair, random_dataset


def test_count_frequencies_example():
    assert count_frequencies([5, 3, 5, 5, 2, 3]) == [(2, 1), (3, 2), (5, 3)]
    assert count_frequencies([]) == []


def test_k_select_examples():
    assert k_select([5, 3, 5, 5, 2, 3], 2).neighbors == [(5, 3), (3, 2)]
    assert k_select([7, 9], 1).neighbors == [(7, 1)]
    assert k_select([9, 7], 5).neighbors == [(7, 1), (9, 1)]
    assert len(k_select([], 3)) == 0
    assert k_select([5, 3, 5], 3, exclude=5).neighbors == [(3, 1)]
    assert k_select([5, 3, 5], 3, min_count=2).neighbors == [(5, 2)]
    with pytest.raises(ValueError):
        k_select([1], 0)


@given(st.lists(st.integers(0, 30), max_size=80), st.integers(1, 40))
def test_k_select_order_contract(a, k):
    got = k_select(a, k).neighbors
    counts = dict(count_frequencies(a))
    assert len(got) == min(k, len(counts))
    for i, c in got:
        assert counts[i] == c
    keys = [(-c, i) for i, c in got]
    assert keys == sorted(keys)
    if got:
        # nothing left out beats the weakest selected entry
        worst = keys[-1]
        assert all((-c, i) >= worst for i, c in counts.items() if (i, c) not in got)


@settings(max_examples=30)
@given(st.lists(st.integers(0, 1000), max_size=50), st.integers(1, 10), st.integers(1, 10**6))
def test_k_select_offset_invariant(a, k, offset):
    base = k_select(a, k)
    shifted = k_select([x + offset for x in a], k)
    assert np.array_equal(base.ids + offset, shifted.ids)
    assert np.array_equal(base.counts, shifted.counts)


def test_aggregate_bounded_by_L_times_R():
    data = random_dataset(3000, 200, 4, seed=0)
    cfg = IndexConfig.make(K=1, L=8, rangebits=6, R=5)
    index = build(data, cfg)
    for i in range(0, 3000, 97):
        a = aggregate(index, data[i])
        assert a.size <= 8 * 5
        assert np.all((a >= 0) & (a < 3000))


def test_aggregate_reads_shared_reservoir_once():
    cfg = IndexConfig.make(K=1, L=4, rangebits=4, R=8, F=1 / 64)
    index = ReservoirIndex(cfg)
    # pool holds a single reservoir so every table binds to it
    assert cfg.pool_size == 1
    x = np.array([1, 2, 3])
    index.add(0, x)
    assert index.counters[0] == 4
    # the reservoir is read once; it holds one copy per table that streamed x
    assert aggregate(index, x).tolist() == index.reservoir_ids(0).tolist() == [0, 0, 0, 0]
    assert query(index, x, 3).neighbors == [(0, 4)]


def test_empty_query_rejected():
    index = ReservoirIndex(IndexConfig.make(K=1, L=2, rangebits=4))
    with pytest.raises(EmptyVectorError):
        query(index, np.array([], dtype=np.int64), 3)


def test_two_point_index_with_exclusion():
    x = np.array([10, 20, 30])
    data = Dataset.from_vectors([x, x])
    index = build(data, IndexConfig.make(K=2, L=16, rangebits=10))
    assert query(index, x, 5).neighbors == [(0, 16), (1, 16)]
    assert query(index, x, 5, exclude=0).neighbors == [(1, 16)]


def test_k_larger_than_candidates():
    data = random_dataset(20, 10**6, 30, seed=1)
    index = build(data, IndexConfig.make(K=4, L=8, rangebits=15))
    res = query(index, data[3], 100)
    assert len(res) < 100 and 3 in res.ids.tolist()
    graph = knn_graph(index, data, 100)
    assert graph.ids.shape == (20, 100)
    row = graph[3]
    assert 3 not in row.ids.tolist()
    assert np.all(graph.ids[3, len(row):] == -1) and np.all(graph.counts[3, len(row):] == 0)


def test_planted_near_neighbor_ranks_first():
    wins = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        q, near = planted_pair(0.9, size=100, seed=seed)
        others = [rng.choice(10**7, 100, replace=False) for _ in range(50)]
        data = Dataset.from_vectors([near] + others)
        index = build(data, IndexConfig.make(K=2, L=32, rangebits=12, R=32, seed=seed))
        res = query(index, q, 1)
        wins += len(res) > 0 and res.ids[0] == 0
    assert wins >= 190


def test_counts_track_similarity_order():
    rho = []
    targets = [0.9, 0.7, 0.5, 0.3]
    for seed in range(50):
        q, data, _ = similarity_ladder(100, targets, background=100, seed=seed)
        index = build(data, IndexConfig.make(K=2, L=32, rangebits=12, R=32, seed=seed))
        res = query(index, q, 10)
        counts = dict(res.neighbors)
        rho.append(spearmanr(targets, [counts.get(i, 0) for i in range(4)]).statistic)
    assert np.nanmean(rho) > 0.9


def test_count_estimates_collision_rate():
    # K=1: a point's count is the number of tables whose single hash matches
    for j in (0.3, 0.6, 0.9):
        counts = []
        for seed in range(300):
            q, y = planted_pair(j, size=60, seed=seed)
            index = build(Dataset.from_vectors([y]), IndexConfig.make(K=1, L=32, rangebits=12,
                                                                      seed=seed))
            res = query(index, q, 1)
            counts.append(res.counts[0] if len(res) else 0)
        assert abs(np.mean(counts) - 32 * j) <= 0.05 * 32


def test_batch_matches_single_queries():
    data = random_dataset(400, 500, 8, seed=2)
    index = build(data, IndexConfig.make(K=1, L=12, rangebits=8, R=6, F=0.4))
    graph = query_batch(index, data, 7, exclude=data.ids)
    for i in range(len(data)):
        want = query(index, data[i], 7, exclude=i)
        assert graph[i].neighbors == want.neighbors


def test_batch_min_count():
    data = random_dataset(300, 400, 8, seed=3)
    index = build(data, IndexConfig.make(K=1, L=12, rangebits=8, R=6))
    graph = query_batch(index, data, 9, min_count=3)
    for i in range(len(data)):
        assert graph[i].neighbors == query(index, data[i], 9, min_count=3).neighbors
        assert np.all(graph[i].counts >= 3)


def test_batch_reports_empty_query():
    index = build(random_dataset(10, 100, 5, seed=0), IndexConfig.make(K=1, L=4, rangebits=6))
    with pytest.raises(EmptyVectorError) as err:
        query_batch(index, Dataset.from_vectors([[1], [], [3]]), 3)
    assert err.value.ident == 1


def test_batch_validates_arguments():
    data = random_dataset(10, 100, 5, seed=0)
    index = build(data, IndexConfig.make(K=1, L=4, rangebits=6))
    with pytest.raises(ValueError):
        query_batch(index, data, 0)
    with pytest.raises(ValueError):
        query_batch(index, data, 3, workers=0)
    with pytest.raises(ValueError):
        query_batch(index, data, 3, exclude=[1, 2])


def test_graph_identical_pair():
    x = np.array([4, 8, 15, 16, 23, 42])
    data = Dataset.from_vectors([x, x])
    graph = knn_graph(index := build(data, IndexConfig.make(L=20)), data, 5)
    assert index.count == 2
    assert graph[0].neighbors == [(1, 20)]
    assert graph[1].neighbors == [(0, 20)]


def test_graph_independent_of_workers(small_planted):
    data, _ = small_planted
    index = build(data, IndexConfig.make(K=2, L=16, rangebits=12, R=8))
    assert knn_graph(index, data, 10, workers=1) == knn_graph(index, data, 10, workers=8)


def test_graph_links_clusters(desk):
    data, labels = desk
    index = build(data, IndexConfig.make(K=4, L=32, R=32), workers=4)
    graph = knn_graph(index, data, 10, workers=4)
    src = np.repeat(np.arange(len(data)), 10).reshape(-1, 10)
    valid = graph.ids >= 0
    same = labels[graph.ids[valid]] == labels[src[valid]]
    assert same.mean() >= 0.9


def test_graph_writers():
    data = Dataset.from_vectors([[1, 2, 3], [1, 2, 3], [9]])
    graph = knn_graph(build(data, IndexConfig.make(K=1, L=3, rangebits=8)), data, 2)
    tsv = io.StringIO()
    graph.write_tsv(tsv)
    lines = tsv.getvalue().splitlines()
    assert lines[0] == "0\t1:3" and lines[1] == "1\t0:3" and lines[2] == "2\t"
    out = io.StringIO()
    graph.write_csv(out)
    assert out.getvalue().splitlines()[:2] == ["source,target,count,rank", "0,1,3,0"]


def test_bounded_buckets_versus_unbounded_tables():
    # an unbounded table keeps every duplicate; the reservoir index keeps R
    base = random_dataset(2000, 10**6, 30, seed=4)
    data = with_hot_duplicates(base, 0.5, seed=1)
    cfg = IndexConfig.make(K=2, L=8, rangebits=12, R=16)
    index = build(data, cfg)
    sig = signatures(data, cfg.hash)
    plain: dict[tuple[int, int], list[int]] = defaultdict(list)
    for i, s in enumerate(sig):
        for t, a in enumerate(table_addresses(s, cfg.hash).tolist()):
            plain[t, a].append(i)
    biggest = max(len(v) for v in plain.values())
    assert biggest >= 1000
    assert max(index.bucket(t, a).size for t, a in plain) <= 16
    counts = np.unique(data.indices.reshape(-1, 30), axis=0, return_counts=True)[1]
    assert counts.max() == 1000
    rows = data.indices.reshape(-1, 30)
    values, inverse, counts = np.unique(rows, axis=0, return_inverse=True, return_counts=True)
    hot = values[np.argmax(counts)]
    assert aggregate(index, hot).size <= 8 * 16
    unbounded = sum(len(plain[t, a]) for t, a in enumerate(
        table_addresses(doph_signature(hot, cfg.hash), cfg.hash).tolist()))
    assert unbounded >= 8 * 1000
