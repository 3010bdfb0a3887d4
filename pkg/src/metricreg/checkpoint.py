"""Versioned JSON checkpoint container.

Layout (``format`` = "metricreg-checkpoint", ``version`` = 1)::

    mode, layer_sizes, activation
    encoder: {weights: [[flat row-major floats], ...], biases: [[...], ...]}
    head:    {weight: [...], bias: [...], shape: [d_y, d_f]} | null
    adam:    {lr, beta1, beta2, eps, step, moments: [{shape, m, v}, ...]}
    loss_state: {log_s, ema_lbar, iteration}
    radius, best_iteration, best_val_mae
    config:  the resolved experiment config

Floats are written with Python's shortest round-trip repr, so loading
reproduces every parameter bitwise and rewriting yields identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .encoder import AdamState, EncoderParams, HeadParams
from .errors import InvalidInputError
from .loss import LossState

FORMAT = "metricreg-checkpoint"
VERSION = 1


def _flat(a):
    return np.asarray(a, dtype=np.float64).ravel().tolist()


def to_dict(result, config=None):
    p = result.params
    d = {
        "format": FORMAT,
        "version": VERSION,
        "mode": result.config.mode,
        "layer_sizes": list(p.layer_sizes),
        "activation": p.activation,
        "encoder": {"weights": [_flat(W) for W in p.weights], "biases": [_flat(b) for b in p.biases]},
        "head": None if result.head is None else {
            "shape": list(result.head.weight.shape),
            "weight": _flat(result.head.weight), "bias": _flat(result.head.bias)},
        "adam": {
            "lr": result.adam.lr, "beta1": result.adam.beta1, "beta2": result.adam.beta2,
            "eps": result.adam.eps, "step": result.adam.step,
            "moments": [{"shape": list(m.shape), "m": _flat(m), "v": _flat(v)}
                        for m, v in zip(result.adam.m, result.adam.v)],
        },
        "loss_state": {"log_s": result.loss_state.log_s, "ema_lbar": result.loss_state.ema_lbar,
                       "iteration": result.loss_state.iteration},
        "radius": result.radius,
        "best_iteration": result.best_iteration,
        "best_val_mae": result.best_val_mae,
        "config": config if config is not None else {"train": result.config.to_dict()},
    }
    return d


def save(path, result, config=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_dict(result, config), sort_keys=True) + "\n")
    return path


class Checkpoint:
    """Loaded checkpoint: the pieces needed to embed, predict, or resume."""

    def __init__(self, d):
        if d.get("format") != FORMAT:
            raise InvalidInputError("not a metricreg checkpoint")
        if d.get("version") != VERSION:
            raise InvalidInputError(f"unsupported checkpoint version {d.get('version')}")
        sizes = d["layer_sizes"]
        weights = [np.array(w, dtype=np.float64).reshape(o, i)
                   for w, i, o in zip(d["encoder"]["weights"], sizes[:-1], sizes[1:])]
        biases = [np.array(b, dtype=np.float64) for b in d["encoder"]["biases"]]
        self.params = EncoderParams(list(sizes), weights, biases, d["activation"])
        h = d["head"]
        self.head = None if h is None else HeadParams(
            np.array(h["weight"], dtype=np.float64).reshape(h["shape"]), np.array(h["bias"], dtype=np.float64))
        a = d["adam"]
        self.adam = AdamState(
            lr=a["lr"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"], step=a["step"],
            m=[np.array(x["m"], dtype=np.float64).reshape(x["shape"]) for x in a["moments"]],
            v=[np.array(x["v"], dtype=np.float64).reshape(x["shape"]) for x in a["moments"]])
        ls = d["loss_state"]
        self.loss_state = LossState(ls["log_s"], ls["ema_lbar"], ls["iteration"])
        self.mode = d["mode"]
        self.radius = d["radius"]
        self.best_iteration = d["best_iteration"]
        self.best_val_mae = d["best_val_mae"]
        self.config = d["config"]

    @property
    def d_x(self):
        return self.params.layer_sizes[0]


def load(path) -> Checkpoint:
    return Checkpoint(json.loads(Path(path).read_text()))
