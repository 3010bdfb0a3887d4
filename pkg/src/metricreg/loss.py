"""Regression metric loss: isometry residuals, label-Gaussian weights, EMA hard-pair mining.

Pairs are ordered and the diagonal is excluded everywhere, so every
unordered pair counts twice in numerator and denominator alike.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError
from .linalg import as_matrix, pairwise_euclidean


@dataclass(frozen=True)
class LossConfig:
    sigma: float = 0.5
    alpha: float = 0.1
    ema_decay: float = 0.9
    mining_enabled: bool = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidInputError(f"sigma must be > 0, got {self.sigma}")
        if self.alpha < 0:
            raise InvalidInputError(f"alpha must be >= 0, got {self.alpha}")
        if not 0 <= self.ema_decay < 1:
            raise InvalidInputError(f"ema_decay must lie in [0, 1), got {self.ema_decay}")


@dataclass(frozen=True)
class LossState:
    log_s: float = 0.0
    ema_lbar: float | None = None
    iteration: int = 0

    @property
    def s(self) -> float:
        return math.exp(self.log_s)


@dataclass
class PairBatch:
    D: np.ndarray            # |s*||f_i - f_j|| - ||y_i - y_j|||
    W: np.ndarray            # exp(-||y_i - y_j||^2 / 2 sigma^2) + alpha
    dist_f: np.ndarray
    dist_y: np.ndarray
    s: float
    M: np.ndarray | None = None
    batch_mean: float | None = None  # mean off-diagonal W*D of this batch
    loss: float | None = None
    fallback: bool = False
    pair_count_selected: int = 0

    @property
    def offdiag(self) -> np.ndarray:
        B = self.D.shape[0]
        return ~np.eye(B, dtype=bool)

    @property
    def selected_fraction(self) -> float:
        off = self.offdiag
        return float(self.M[off].mean())


def pair_terms(F, Y, state: LossState, cfg: LossConfig) -> PairBatch:
    F = as_matrix(F, "F")
    Y = as_matrix(Y, "Y")
    if F.shape[0] != Y.shape[0]:
        raise InvalidInputError(f"row mismatch: F has {F.shape[0]}, Y has {Y.shape[0]}")
    if F.shape[0] < 2:
        raise InvalidInputError("a batch needs at least two samples")
    s = state.s
    dist_f = pairwise_euclidean(F)
    dist_y = pairwise_euclidean(Y)
    D = np.abs(s * dist_f - dist_y)
    if math.isinf(cfg.sigma):
        W = np.full_like(dist_y, 1.0 + cfg.alpha)
    else:
        W = np.exp(-dist_y ** 2 / (2.0 * cfg.sigma ** 2)) + cfg.alpha
    return PairBatch(D=D, W=W, dist_f=dist_f, dist_y=dist_y, s=s)


def mine_mask(batch: PairBatch, state: LossState, cfg: LossConfig):
    """Update the EMA threshold, then keep pairs whose weighted residual strictly exceeds it.

    The first call seeds the threshold with the batch mean itself.
    Returns ``(M, new_state)``; ``batch.M`` and ``batch.batch_mean`` are filled too.
    """
    off = batch.offdiag
    WD = batch.W * batch.D
    mean = float(WD[off].mean())
    if state.ema_lbar is None:
        lbar = mean
    else:
        lbar = cfg.ema_decay * state.ema_lbar + (1.0 - cfg.ema_decay) * mean
    if cfg.mining_enabled:
        M = ((WD > lbar) & off).astype(np.float64)
    else:
        M = off.astype(np.float64)
    batch.M = M
    batch.batch_mean = mean
    batch.pair_count_selected = int(M.sum())
    return M, replace(state, ema_lbar=lbar, iteration=state.iteration + 1)


def _normalised_weights(batch: PairBatch):
    """Per-pair weights m*w / sum(m*w); falls back to the unmasked weights when nothing is selected."""
    off = batch.offdiag
    MW = batch.M * batch.W
    total = MW.sum()
    fallback = bool(total == 0.0)
    if fallback:
        MW = np.where(off, batch.W, 0.0)
        total = MW.sum()
    return MW / total, fallback


def rm_loss(batch: PairBatch) -> float:
    if batch.M is None:
        raise InvalidInputError("mine_mask must run before rm_loss")
    weights, fallback = _normalised_weights(batch)
    batch.fallback = fallback
    batch.loss = float(np.sum(weights * batch.D))
    return batch.loss


def rm_loss_backward(batch: PairBatch, F, Y=None, state: LossState | None = None):
    """Gradient of the masked loss w.r.t. the embeddings and log-scale.

    Mask and threshold are constants; ``sign(0) = 0`` at the residual kink
    and coincident embeddings contribute nothing to ``dL_dF``.
    Returns ``(dL_dF, dL_dlog_s)``.
    """
    F = as_matrix(F, "F")
    weights, _ = _normalised_weights(batch)
    s = batch.s
    resid = s * batch.dist_f - batch.dist_y
    sgn = np.sign(resid)
    dL_dlog_s = float(np.sum(weights * sgn * s * batch.dist_f))

    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(batch.dist_f > 0, weights * sgn * s / batch.dist_f, 0.0)
    coef = coef + coef.T
    # sum_j coef_ij (f_i - f_j)
    dL_dF = coef.sum(axis=1)[:, None] * F - coef @ F
    return dL_dF, dL_dlog_s


def mse_loss(Yhat, Y):
    Yhat = as_matrix(Yhat, "Yhat")
    Y = as_matrix(Y, "Y")
    if Yhat.shape != Y.shape:
        raise InvalidInputError(f"shape mismatch {Yhat.shape} vs {Y.shape}")
    r = Yhat - Y
    return float(np.mean(r * r)), 2.0 * r / r.size


def l1_loss(Yhat, Y):
    Yhat = as_matrix(Yhat, "Yhat")
    Y = as_matrix(Y, "Y")
    if Yhat.shape != Y.shape:
        raise InvalidInputError(f"shape mismatch {Yhat.shape} vs {Y.shape}")
    r = Yhat - Y
    return float(np.mean(np.abs(r))), np.sign(r) / r.size
