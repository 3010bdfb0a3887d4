"""Regression metrics and representation-space quality metrics (D5, residual variance)."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.sparse.csgraph import csgraph_from_dense, shortest_path

from .errors import DegenerateInputError, GraphDegeneracyError, InvalidInputError
from .linalg import as_matrix, cross_euclidean, pairwise_euclidean, pearson

DEFAULT_K_CANDIDATES = (5, 10, 15, 20, 25)


@dataclass
class MetricsReport:
    mae: float
    r2: float
    d5: float
    rv: float
    rv_best_k: int
    n_test: int
    extrapolated_fraction: float

    def to_dict(self):
        return asdict(self)


def mae(Yhat, Y) -> float:
    Yhat, Y = as_matrix(Yhat), as_matrix(Y)
    if Yhat.shape != Y.shape:
        raise InvalidInputError(f"shape mismatch {Yhat.shape} vs {Y.shape}")
    return float(np.mean(np.abs(Yhat - Y)))


def r2(Yhat, Y) -> float:
    """Coefficient of determination, averaged over label dimensions."""
    Yhat, Y = as_matrix(Yhat), as_matrix(Y)
    if Yhat.shape != Y.shape:
        raise InvalidInputError(f"shape mismatch {Yhat.shape} vs {Y.shape}")
    if Y.shape[0] < 2:
        raise InvalidInputError("r2 needs at least two samples")
    ss_tot = np.sum((Y - Y.mean(axis=0)) ** 2, axis=0)
    if np.any(ss_tot == 0):
        raise DegenerateInputError("r2 undefined for a label dimension with zero variance")
    ss_res = np.sum((Y - Yhat) ** 2, axis=0)
    return float(np.mean(1.0 - ss_res / ss_tot))


def nearest_indices(F_query, F_ref, k):
    """Indices of the k nearest rows of F_ref for every query row; ties by lower index."""
    dist = cross_euclidean(F_query, F_ref)
    return np.argsort(dist, axis=1, kind="stable")[:, :k]


def d5(F_test, Y_test, F_train, Y_train, k=5) -> float:
    """Mean label distance from each test sample to its 5 nearest training embeddings."""
    F_train, Y_train = as_matrix(F_train), as_matrix(Y_train)
    Y_test = as_matrix(Y_test)
    if F_train.shape[0] < k:
        raise InvalidInputError(f"d5 needs at least {k} training points")
    idx = nearest_indices(F_test, F_train, k)
    diffs = Y_test[:, None, :] - Y_train[idx]
    return float(np.mean(np.sqrt(np.sum(diffs ** 2, axis=2))))


@dataclass
class KnnGraph:
    weights: np.ndarray   # T x T, np.inf where no edge, 0 on the diagonal
    adjacency: np.ndarray
    k: int


def knn_graph(F, k: int) -> KnnGraph:
    """Symmetrised (union) k-nearest-neighbour graph with Euclidean edge weights."""
    F = as_matrix(F)
    T = F.shape[0]
    if not 1 <= k < T:
        raise InvalidInputError(f"k must lie in [1, {T - 1}], got {k}")
    dist = pairwise_euclidean(F)
    ranked = np.argsort(dist, axis=1, kind="stable")
    adj = np.zeros((T, T), dtype=bool)
    for i in range(T):
        # drop self; with duplicate points self may not sort first
        nbrs = ranked[i][ranked[i] != i][:k]
        adj[i, nbrs] = True
    adj |= adj.T
    W = np.where(adj, dist, np.inf)
    np.fill_diagonal(W, 0.0)
    return KnnGraph(W, adj, k)


@dataclass
class GeodesicResult:
    distances: np.ndarray
    k_used: int
    connected: bool


def geodesic_distances(graph: KnnGraph) -> GeodesicResult:
    """All-pairs shortest paths by Dijkstra from every node."""
    # inf marks non-edges so zero-length edges between duplicate points survive
    sparse = csgraph_from_dense(graph.weights, null_value=np.inf)
    G = shortest_path(sparse, method="D", directed=False)
    G = np.minimum(G, G.T)
    np.fill_diagonal(G, 0.0)
    return GeodesicResult(G, graph.k, bool(np.all(np.isfinite(G))))


class ResidualVariance(NamedTuple):
    rv: float
    best_k: int
    per_k: dict            # k -> rv (only k values that produced a usable graph)
    excluded_fraction: dict  # k -> fraction of test pairs with infinite geodesic


def candidate_ks(T, k_candidates=DEFAULT_K_CANDIDATES):
    ks = sorted({min(int(k), T - 1) for k in k_candidates if int(k) >= 1})
    return [k for k in ks if k >= 1]


def residual_variance(F_test, Y_test, k_candidates=DEFAULT_K_CANDIDATES) -> ResidualVariance:
    """1 - pearson(geodesic embedding distance, label distance), minimised over k.

    Pairs left disconnected by the k-NN graph are dropped from the
    correlation; a k whose graph drops more than half the pairs is skipped.
    """
    F_test, Y_test = as_matrix(F_test), as_matrix(Y_test)
    T = F_test.shape[0]
    if T < 3:
        raise InvalidInputError("residual_variance needs at least 3 samples")
    if Y_test.shape[0] != T:
        raise InvalidInputError("F_test and Y_test row counts differ")
    iu = np.triu_indices(T, 1)
    label_dist = pairwise_euclidean(Y_test)[iu]
    per_k, excluded = {}, {}
    for k in candidate_ks(T, k_candidates):
        geo = geodesic_distances(knn_graph(F_test, k)).distances[iu]
        finite = np.isfinite(geo)
        excluded[k] = float(1.0 - finite.mean())
        if excluded[k] > 0.5 or finite.sum() < 2:
            continue
        try:
            per_k[k] = 1.0 - pearson(geo[finite], label_dist[finite])
        except DegenerateInputError:
            continue
    if not per_k:
        raise GraphDegeneracyError("no k candidate produced a usable k-NN graph")
    best_k = min(per_k, key=lambda k: (per_k[k], k))
    return ResidualVariance(per_k[best_k], best_k, per_k, excluded)
