"""Training loops for the metric loss and the MSE / L1 head baselines."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .data import Dataset, batch_iter
from .encoder import (AdamState, EncoderParams, HeadParams, adam_step, encoder_backward,
                      encoder_forward, head_backward, head_forward)
from .errors import InvalidInputError, NonFiniteGradientError, TrainingDivergedError
from .inference import EmbeddingIndex, predict_batch, tune_radius
from .loss import LossConfig, LossState, l1_loss, mine_mask, mse_loss, pair_terms, rm_loss, rm_loss_backward

MODES = ("rm", "mse", "l1")


def _strict(cls, d, where):
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise InvalidInputError(f"unknown {where} field(s): {sorted(unknown)}")
    return d


def loss_config_from_dict(d) -> LossConfig:
    d = dict(_strict(LossConfig, d, "loss"))
    if isinstance(d.get("sigma"), str):
        d["sigma"] = float(d["sigma"])      # "inf" selects constant weights
    return LossConfig(**d)


def loss_config_to_dict(cfg: LossConfig):
    d = asdict(cfg)
    if math.isinf(d["sigma"]):
        d["sigma"] = "inf"
    return d


@dataclass
class TrainConfig:
    mode: str = "rm"
    iterations: int = 5000
    batch_size: int = 64
    lr: float = 1e-4
    loss: LossConfig = field(default_factory=LossConfig)
    eval_every: int = 250
    seed: int = 0
    hidden: tuple = (64, 64)
    d_f: int = 8
    activation: str = "tanh"
    radius_grid_points: int = 32

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.iterations <= 0:
            raise InvalidInputError("iterations must be > 0")
        if self.batch_size < 2:
            raise InvalidInputError("batch_size must be >= 2")
        if self.eval_every <= 0 or not self.lr > 0 or self.d_f < 1:
            raise InvalidInputError("eval_every, lr and d_f must be positive")
        self.hidden = tuple(int(h) for h in self.hidden)

    def layer_sizes(self, d_x):
        return [d_x, *self.hidden, self.d_f]

    def to_dict(self):
        d = asdict(self)
        d["loss"] = loss_config_to_dict(self.loss)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(_strict(cls, d, "train"))
        if "loss" in d:
            d["loss"] = loss_config_from_dict(d["loss"])
        return cls(**d)


@dataclass
class TrainResult:
    params: EncoderParams
    loss_state: LossState
    adam: AdamState
    head: HeadParams | None
    radius: float | None
    best_iteration: int
    best_val_mae: float
    log: list
    config: TrainConfig


def embed(params: EncoderParams, X) -> np.ndarray:
    return encoder_forward(params, X)[0]


def predict_labels(result_or_parts, F_query, F_train=None, Y_train=None):
    """Normalised-label predictions: head output for baselines, radius NN otherwise.

    Returns ``(Yhat, extrapolated_flags)``.
    """
    r = result_or_parts
    if r.head is not None:
        return head_forward(r.head, F_query), np.zeros(F_query.shape[0], dtype=bool)
    return predict_batch(EmbeddingIndex(F_train, Y_train, r.radius), F_query)


def _seeds(seed):
    """Independent streams for init, batching and head init."""
    return int(seed), int(seed) + 1, int(seed) + 2


def train(dataset: Dataset, cfg: TrainConfig) -> TrainResult:
    """Run ``cfg.iterations`` Adam steps and keep the parameters with the best validation MAE.

    Validation MAE is measured in raw label units. In ``rm`` mode it uses
    radius NN with the radius re-tuned on every evaluation.
    """
    train_idx = dataset.indices("train")
    if train_idx.size < 2 or dataset.indices("val").size == 0:
        raise InvalidInputError("dataset needs >= 2 train rows and a non-empty val split")
    X_tr, Y_tr, _ = dataset.part("train")
    X_va, Y_va, Yraw_va = dataset.part("val")

    init_seed, batch_seed, head_seed = _seeds(cfg.seed)
    params = EncoderParams.init(cfg.layer_sizes(dataset.d_x), init_seed, cfg.activation)
    rm = cfg.mode == "rm"
    head = None if rm else HeadParams.init(cfg.d_f, dataset.d_y, head_seed)
    log_s = np.zeros(1)
    extra = [log_s] if rm else head.arrays()
    adam = AdamState.for_params(params.arrays() + extra, lr=cfg.lr)
    state = LossState()

    batches = batch_iter(train_idx, cfg.batch_size, batch_seed)
    log = []
    best = None

    for it in range(1, cfg.iterations + 1):
        idx = next(batches)
        Xb, Yb = dataset.X[idx], dataset.Y[idx]
        F, cache = encoder_forward(params, Xb)
        rec = {"iteration": it}
        if rm:
            state = replace(state, log_s=float(log_s[0]))
            batch = pair_terms(F, Yb, state, cfg.loss)
            _, state = mine_mask(batch, state, cfg.loss)
            loss = rm_loss(batch)
            _check(loss, it, idx)
            dF, dlog_s = rm_loss_backward(batch, F)
            grads = encoder_backward(params, cache, dF).arrays() + [np.array([dlog_s])]
            rec.update(loss=loss, lbar=state.ema_lbar, batch_mean=batch.batch_mean, s=batch.s,
                       selected_fraction=batch.selected_fraction, fallback=batch.fallback)
        else:
            Yhat = head_forward(head, F)
            loss, dY = (mse_loss if cfg.mode == "mse" else l1_loss)(Yhat, Yb)
            _check(loss, it, idx)
            dF, dW, db = head_backward(head, F, dY)
            grads = encoder_backward(params, cache, dF).arrays() + [dW, db]
            rec.update(loss=loss)
        try:
            adam_step(params.arrays() + extra, grads, adam)
        except NonFiniteGradientError as exc:
            raise TrainingDivergedError({"iteration": it, "batch_indices": idx.tolist(),
                                         "parameter_group": exc.layer_index}) from exc
        if rm:
            state = replace(state, log_s=float(log_s[0]))

        if it % cfg.eval_every == 0 or it == cfg.iterations:
            F_tr, F_va = embed(params, X_tr), embed(params, X_va)
            if rm:
                search = tune_radius(F_tr, Y_tr, F_va, Y_va,
                                     n_points=cfg.radius_grid_points)
                Yhat_va, _ = predict_batch(EmbeddingIndex(F_tr, Y_tr, search.radius), F_va)
                rec["radius"] = search.radius
            else:
                Yhat_va = head_forward(head, F_va)
            val_mae = float(np.mean(np.abs(dataset.norm.invert(Yhat_va) - Yraw_va)))
            rec["val_mae"] = val_mae
            if best is None or val_mae < best["val_mae"]:
                best = {"val_mae": val_mae, "iteration": it, "params": params.copy(),
                        "state": state, "adam": adam.copy(),
                        "head": None if head is None else head.copy()}
        log.append(rec)

    radius = None
    if rm:
        F_tr, F_va = embed(best["params"], X_tr), embed(best["params"], X_va)
        radius = tune_radius(F_tr, Y_tr, F_va, Y_va,
                             n_points=cfg.radius_grid_points).radius
    return TrainResult(best["params"], best["state"], best["adam"], best["head"], radius,
                       best["iteration"], best["val_mae"], log, cfg)


def _check(loss, it, idx):
    if not math.isfinite(loss):
        raise TrainingDivergedError({"iteration": it, "batch_indices": idx.tolist(), "loss": loss})
