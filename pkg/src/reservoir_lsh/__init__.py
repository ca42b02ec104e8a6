"""Similarity-free approximate nearest-neighbor search for sparse binary data.

Densified minwise hashes address L tables of fixed-size reservoirs; queries
rank candidates by how many of their buckets they share.
"""

from .doph import HashParams, doph_signature, signatures, table_addresses
from .evaluation import GroundTruth, MetricsReport, ground_truth, r_at_k, s_at_k, sweep
from .index import IndexConfig, Reservoir, ReservoirIndex, build
from .query import KnnGraph, QueryResult, aggregate, count_frequencies, k_select, knn_graph, query
from .sparse import (Dataset, SparseVector, brute_force_topk, cosine, jaccard, parse_libsvm,
                     read_libsvm, write_libsvm)

__all__ = [
    "Dataset", "GroundTruth", "HashParams", "IndexConfig", "KnnGraph", "MetricsReport",
    "QueryResult", "Reservoir", "ReservoirIndex", "SparseVector", "aggregate",
    "brute_force_topk", "build", "cosine", "count_frequencies", "doph_signature",
    "ground_truth", "jaccard", "k_select", "knn_graph", "parse_libsvm", "query",
    "r_at_k", "read_libsvm", "s_at_k", "signatures", "sweep", "table_addresses",
    "write_libsvm",
]
