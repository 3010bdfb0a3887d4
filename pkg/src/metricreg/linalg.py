"""Dense float64 primitives: pairwise distances, Pearson correlation, PCA."""
from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

# rows per chunk when materialising (rows, N, d) difference tensors
_CHUNK_ELEMS = 4_000_000


def as_matrix(A, name="A") -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {A.shape}")
    return A


def cross_euclidean(A, B) -> np.ndarray:
    """Euclidean distances between every row of ``A`` and every row of ``B``.

    Uses the direct ``sum((a - b)**2)`` form per pair instead of the Gram
    expansion, so identical rows give exactly 0.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise InvalidInputError(f"column mismatch: {A.shape[1]} vs {B.shape[1]}")
    out = np.empty((A.shape[0], B.shape[0]))
    step = max(1, _CHUNK_ELEMS // max(1, B.shape[0] * max(1, A.shape[1])))
    for lo in range(0, A.shape[0], step):
        diff = A[lo:lo + step, None, :] - B[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        np.maximum(sq, 0.0, out=sq)
        out[lo:lo + step] = np.sqrt(sq)
    return out


def pairwise_euclidean(A) -> np.ndarray:
    """Symmetric N x N distance matrix of the rows of ``A`` (zero diagonal)."""
    A = as_matrix(A)
    if A.size == 0:
        raise InvalidInputError("pairwise_euclidean needs a non-empty matrix")
    D = cross_euclidean(A, A)
    # the per-pair difference is already symmetric; enforce it bitwise anyway
    D = np.triu(D, 1)
    return D + D.T


def pearson(u, v) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape or u.size < 2:
        raise InvalidInputError("pearson needs two vectors of equal length >= 2")
    du = u - u.mean()
    dv = v - v.mean()
    su = np.sqrt(np.dot(du, du))
    sv = np.sqrt(np.dot(dv, dv))
    if su == 0.0 or sv == 0.0:
        raise DegenerateInputError("zero variance input to pearson")
    r = float(np.dot(du, dv) / (su * sv))
    return min(1.0, max(-1.0, r))


def pca_project(A, out_dims: int):
    """Project mean-centred rows of ``A`` onto the leading principal axes.

    Returns ``(projection, info)``. ``info`` has ``explained_variance`` and
    ``rank_deficient`` (True when fewer than ``out_dims`` components carry
    variance; those columns are zero-filled). Each component's sign is fixed
    so its largest-magnitude loading is positive.
    """
    A = as_matrix(A)
    n, d = A.shape
    if out_dims < 1:
        raise InvalidInputError("out_dims must be >= 1")
    centred = A - A.mean(axis=0)
    cov = centred.T @ centred / max(n - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    for j in range(d):
        col = evecs[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            evecs[:, j] = -col

    tol = max(n, d) * np.finfo(float).eps * (evals[0] if d else 0.0)
    rank = int(np.sum(evals > tol)) if d else 0
    usable = min(out_dims, d, rank)
    proj = np.zeros((n, out_dims))
    proj[:, :usable] = centred @ evecs[:, :usable]
    variances = np.zeros(out_dims)
    variances[:usable] = evals[:usable]
    info = {
        "explained_variance": variances,
        "components": evecs[:, :usable].T.copy(),
        "rank_deficient": usable < out_dims,
    }
    return proj, info
