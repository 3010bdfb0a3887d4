"""Experiment configs and the train / evaluate / ablate pipelines behind the CLI."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Dataset, generate, load_dataset, subsample
from .errors import InvalidInputError
from .loss import LossConfig
from .metrics import DEFAULT_K_CANDIDATES, MetricsReport, d5, mae, r2, residual_variance
from .trainer import TrainConfig, embed, loss_config_to_dict, predict_labels, train

DATASET_KEYS = {"kind", "n", "d_x", "noise_sd", "fractions", "label_norm", "path", "train_fraction"}
TOP_KEYS = {"seed", "dataset", "train", "metrics", "ablation", "checkpoint", "split"}
DEFAULT_SIGMAS = (0.25, 0.5, 1.0, 1.5, "inf")
DEFAULT_ALPHAS = (0.0, 0.1, 0.2, 0.3)


@dataclass
class ExperimentConfig:
    seed: int
    dataset: dict
    train: TrainConfig
    k_candidates: tuple = DEFAULT_K_CANDIDATES
    ablation: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d, seed=None, base_dir=None):
        unknown = set(d) - TOP_KEYS
        if unknown:
            raise InvalidInputError(f"unknown config field(s): {sorted(unknown)}")
        seed = d.get("seed") if seed is None else seed
        if seed is None:
            raise InvalidInputError("a seed is required (config 'seed' or --seed)")
        ds = dict(d.get("dataset", {"kind": "curve1d"}))
        bad = set(ds) - DATASET_KEYS
        if bad:
            raise InvalidInputError(f"unknown dataset field(s): {sorted(bad)}")
        if "path" in ds:
            p = Path(ds["path"])
            if not p.is_absolute() and base_dir is not None:
                p = Path(base_dir) / p
            if not p.exists() or not p.with_suffix(".json").exists():
                raise InvalidInputError(f"dataset file {p} (or its .json sidecar) not found")
            ds["path"] = str(p)
        tr = dict(d.get("train", {}))
        if "seed" in tr:
            raise InvalidInputError("set the seed at the top level, not under 'train'")
        tr["seed"] = int(seed)
        train_cfg = TrainConfig.from_dict(tr)
        metrics = dict(d.get("metrics", {}))
        if set(metrics) - {"k_candidates"}:
            raise InvalidInputError(f"unknown metrics field(s): {sorted(set(metrics) - {'k_candidates'})}")
        ks = tuple(int(k) for k in metrics.get("k_candidates", DEFAULT_K_CANDIDATES))
        if not ks or min(ks) < 1:
            raise InvalidInputError("k_candidates must be positive integers")
        abl = dict(d.get("ablation", {}))
        if set(abl) - {"sigmas", "alphas", "mining"}:
            raise InvalidInputError(f"unknown ablation field(s): {sorted(set(abl) - {'sigmas', 'alphas', 'mining'})}")
        cfg = cls(int(seed), ds, train_cfg, ks, abl)
        cfg.raw = cfg.resolved()
        return cfg

    def resolved(self):
        """Fully resolved config, embedded in every artifact."""
        tr = self.train.to_dict()
        tr.pop("seed")
        out = {"seed": self.seed, "dataset": self.dataset, "train": tr,
               "metrics": {"k_candidates": list(self.k_candidates)}}
        if self.ablation:
            out["ablation"] = self.ablation
        return copy.deepcopy(out)


def build_dataset(spec: dict, seed: int) -> Dataset:
    spec = dict(spec)
    fraction = spec.pop("train_fraction", 1.0)
    if "path" in spec:
        ds = load_dataset(spec["path"])
    else:
        ds = generate(
            kind=spec.get("kind", "curve1d"), n=int(spec.get("n", 1000)), d_x=int(spec.get("d_x", 10)),
            noise_sd=float(spec.get("noise_sd", 0.0)), seed=seed,
            fractions=tuple(spec.get("fractions", (0.7, 0.1, 0.2))),
            label_norm=spec.get("label_norm", "zscore"))
    if fraction < 1.0:
        ds = subsample(ds, fraction, seed)
    return ds


@dataclass
class Evaluation:
    report: MetricsReport
    rv_per_k: dict
    F_train: np.ndarray
    F_eval: np.ndarray
    Y_eval_raw: np.ndarray
    Yhat_raw: np.ndarray


def evaluate(model, dataset: Dataset, k_candidates=DEFAULT_K_CANDIDATES, split="test") -> Evaluation:
    """Embed, predict and score one split; label-unit metrics are in raw label units.

    ``model`` is a ``TrainResult`` or a loaded ``Checkpoint``.
    """
    if dataset.d_x != model.params.layer_sizes[0]:
        raise InvalidInputError(
            f"checkpoint expects d_x={model.params.layer_sizes[0]}, dataset has d_x={dataset.d_x}")
    X_tr, Y_tr, Yraw_tr = dataset.part("train")
    X_ev, _, Yraw_ev = dataset.part(split)
    if X_ev.shape[0] < 3:
        raise InvalidInputError(f"split {split!r} has fewer than 3 rows")
    F_tr, F_ev = embed(model.params, X_tr), embed(model.params, X_ev)
    Yhat, flags = predict_labels(model, F_ev, F_tr, Y_tr)
    Yhat_raw = dataset.norm.invert(Yhat)
    rv = residual_variance(F_ev, Yraw_ev, k_candidates)
    report = MetricsReport(
        mae=mae(Yhat_raw, Yraw_ev),
        r2=r2(Yhat_raw, Yraw_ev),
        d5=d5(F_ev, Yraw_ev, F_tr, Yraw_tr),
        rv=rv.rv,
        rv_best_k=int(rv.best_k),
        n_test=int(X_ev.shape[0]),
        extrapolated_fraction=float(np.mean(flags)),
    )
    return Evaluation(report, {int(k): v for k, v in rv.per_k.items()}, F_tr, F_ev, Yraw_ev, Yhat_raw)


def ablation_cells(base: LossConfig, sigmas=DEFAULT_SIGMAS, alphas=DEFAULT_ALPHAS, mining=(True, False)):
    """One-factor-at-a-time grid around ``base``: sigma sweep, alpha sweep, mining toggle. No duplicates."""
    cells, seen = [], set()

    def add(sigma, alpha, m):
        sigma = float(sigma)
        key = (sigma, float(alpha), bool(m))
        if key not in seen:
            seen.add(key)
            cells.append(replace(base, sigma=sigma, alpha=float(alpha), mining_enabled=bool(m)))

    for s in sigmas:
        add(s, base.alpha, base.mining_enabled)
    for a in alphas:
        add(base.sigma, a, base.mining_enabled)
    for m in mining:
        add(base.sigma, base.alpha, m)
    return cells


def cell_name(cfg: LossConfig):
    s = "inf" if math.isinf(cfg.sigma) else f"{cfg.sigma:g}"
    return f"sigma={s}_alpha={cfg.alpha:g}_mining={'on' if cfg.mining_enabled else 'off'}"


def run_cell(dataset, train_cfg: TrainConfig, loss_cfg: LossConfig, k_candidates):
    cfg = replace(train_cfg, mode="rm", loss=loss_cfg)
    result = train(dataset, cfg)
    ev = evaluate(result, dataset, k_candidates)
    return result, ev


def cell_row(loss_cfg, result, ev):
    r = ev.report
    fractions = [rec["selected_fraction"] for rec in result.log if "selected_fraction" in rec]
    return {
        "sigma": loss_config_to_dict(loss_cfg)["sigma"], "alpha": loss_cfg.alpha,
        "mining": "on" if loss_cfg.mining_enabled else "off",
        "mae": r.mae, "r2": r.r2, "d5": r.d5, "rv": r.rv, "rv_best_k": r.rv_best_k,
        "mean_selected_fraction": float(np.mean(fractions)), "radius": result.radius,
        "best_iteration": result.best_iteration,
    }
