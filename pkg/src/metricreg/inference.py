"""Distance-weighted nearest-neighbour prediction inside a fixed radius."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidStateError
from .linalg import as_matrix, cross_euclidean


@dataclass(frozen=True)
class EmbeddingIndex:
    F_train: np.ndarray
    Y_train: np.ndarray
    radius: float

    def __post_init__(self):
        F = as_matrix(self.F_train, "F_train")
        Y = as_matrix(self.Y_train, "Y_train")
        object.__setattr__(self, "F_train", F)
        object.__setattr__(self, "Y_train", Y)
        if F.shape[0] != Y.shape[0]:
            raise InvalidInputError("F_train and Y_train row counts differ")
        if not self.radius > 0:
            raise InvalidInputError(f"radius must be > 0, got {self.radius}")


def _predict_from_distances(dist, Y_train, radius):
    """Core of the estimator given a (T, N) distance block.

    Weights are exp(-d^2 / (2 (r/3)^2)) over neighbours with d <= r; rows
    with no neighbour fall back to the label of the nearest training point.
    """
    bw = radius / 3.0
    inside = dist <= radius
    a = np.where(inside, np.exp(-0.5 * (dist / bw) ** 2), 0.0)
    denom = a.sum(axis=1)
    extrapolated = ~inside.any(axis=1)
    # underflow can zero every weight even with neighbours present; treat as 1-NN
    use_nn = extrapolated | (denom == 0.0)
    Yhat = np.empty((dist.shape[0], Y_train.shape[1]))
    ok = ~use_nn
    # einsum (no BLAS) keeps each row's result independent of batch size
    Yhat[ok] = np.einsum("tn,nd->td", a[ok], Y_train) / denom[ok, None]
    if use_nn.any():
        nearest = np.argmin(dist[use_nn], axis=1)
        Yhat[use_nn] = Y_train[nearest]
    return Yhat, extrapolated


def predict(index: EmbeddingIndex, f_t):
    """Label estimate for one embedding; returns ``(y_hat, extrapolated)``."""
    if index.F_train.shape[0] == 0:
        raise InvalidStateError("empty embedding index")
    f_t = np.asarray(f_t, dtype=np.float64).reshape(1, -1)
    Yhat, flag = predict_batch(index, f_t)
    return Yhat[0], bool(flag[0])


def predict_batch(index: EmbeddingIndex, F_test):
    if index.F_train.shape[0] == 0:
        raise InvalidStateError("empty embedding index")
    F_test = np.asarray(F_test, dtype=np.float64).reshape(-1, index.F_train.shape[1])
    if F_test.shape[0] == 0:
        return np.zeros((0, index.Y_train.shape[1])), np.zeros(0, dtype=bool)
    dist = cross_euclidean(F_test, index.F_train)
    return _predict_from_distances(dist, index.Y_train, index.radius)


def default_radius_grid(dist, n_points=32, lo_pct=1.0, hi_pct=50.0):
    """Geometric grid between two percentiles of the train-val distances (positive part)."""
    positive = dist[dist > 0]
    if positive.size == 0:
        return np.array([]), True
    lo, hi = np.percentile(positive, [lo_pct, hi_pct])
    if not hi > lo:
        return np.array([lo]), False
    return np.geomspace(lo, hi, n_points), False


@dataclass(frozen=True)
class RadiusSearch:
    radius: float
    mae: float
    grid: np.ndarray
    maes: np.ndarray
    degenerate: bool = False


def tune_radius(F_train, Y_train, F_val, Y_val, grid=None, n_points=32) -> RadiusSearch:
    """Pick the radius minimising validation MAE; ties go to the smaller radius.

    ``grid`` may be an explicit sequence of radii; otherwise ``n_points``
    values are spaced geometrically between the 1st and 50th percentile of
    all train-val distances.
    """
    F_train = as_matrix(F_train, "F_train")
    Y_train = as_matrix(Y_train, "Y_train")
    F_val = as_matrix(F_val, "F_val")
    Y_val = as_matrix(Y_val, "Y_val")
    if F_train.shape[0] == 0 or F_val.shape[0] == 0:
        raise InvalidInputError("tune_radius needs non-empty train and validation sets")
    dist = cross_euclidean(F_val, F_train)
    degenerate = False
    if grid is None:
        grid, degenerate = default_radius_grid(dist, n_points)
        if degenerate:
            warnings.warn("all embeddings coincide; radius search is degenerate")
            grid = np.array([np.finfo(float).tiny])
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    if grid.size == 0 or np.any(grid <= 0):
        raise InvalidInputError("radius grid must be non-empty and positive")
    maes = np.empty(grid.size)
    for i, r in enumerate(grid):
        Yhat, _ = _predict_from_distances(dist, Y_train, r)
        maes[i] = np.mean(np.abs(Yhat - Y_val))
    # ties (within rounding of the weighted mean) go to the smallest radius
    tol = 1e-12 * max(1.0, float(np.min(maes)))
    best = int(np.flatnonzero(maes <= np.min(maes) + tol)[0])
    return RadiusSearch(float(grid[best]), float(maes[best]), grid, maes, degenerate)
