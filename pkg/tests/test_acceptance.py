"""Exit criteria for the package; each test prints one PASS/FAIL line in the summary.

Comparison experiments (criteria 4 and 8) share one setting: curve1d with
n=2000, d_x=10, noise_sd=0.1, 5000 Adam iterations at lr=1e-3, batch 64,
sigma=0.5, alpha=0.1, d_f=8, seeds 0-4. The reduced-data runs keep
validation and test rows intact.
"""
import json
import math
import time

import numpy as np
import pytest

from metricreg.cli import main
from metricreg.data import generate, subsample
from metricreg.encoder import EncoderParams, HeadParams, encoder_backward, encoder_forward, head_backward, head_forward
from metricreg.experiment import evaluate
from metricreg.inference import EmbeddingIndex, predict
from metricreg.linalg import pairwise_euclidean, pearson
from metricreg.loss import (LossConfig, LossState, l1_loss, mine_mask, mse_loss, pair_terms, rm_loss,
                            rm_loss_backward)
from metricreg.metrics import geodesic_distances, knn_graph, mae
from metricreg.trainer import TrainConfig, embed, train

from conftest import FIXTURE_A_F, FIXTURE_A_Y
from oracles import brute_rm_loss, central_difference, floyd_warshall, rel_error

SEEDS = range(5)
COMPARE = dict(n=2000, d_x=10, noise_sd=0.1)
COMPARE_TRAIN = dict(iterations=5000, batch_size=64, lr=1e-3, eval_every=250, d_f=8,
                     loss=LossConfig(sigma=0.5, alpha=0.1))


# ---------------------------------------------------------------- criterion 1
def test_gradient_fidelity(acceptance):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = {"rm_F": 0.0, "rm_log_s": 0.0, "encoder": 0.0, "mse": 0.0, "l1": 0.0, "head": 0.0}
    cfg = LossConfig(sigma=0.5, alpha=0.1)
    enc = EncoderParams.init([5, 6, 4], seed=11)
    for b in range(50):
        d_y = 1 + b % 2
        F, Y = rng.normal(size=(16, 4)), rng.normal(size=(16, d_y))
        log_s = float(rng.normal() * 0.3)
        state = LossState(log_s=log_s, ema_lbar=None if b % 3 == 0 else float(rng.uniform(0.2, 1.0)))
        batch = pair_terms(F, Y, state, cfg)
        M, _ = mine_mask(batch, state, cfg)
        rm_loss(batch)
        dF, dls = rm_loss_backward(batch, F)

        def frozen(Fv, ls=log_s):
            bb = pair_terms(Fv, Y, LossState(log_s=ls), cfg)
            bb.M = M
            return rm_loss(bb)

        worst["rm_F"] = max(worst["rm_F"], rel_error(dF, central_difference(frozen, F)))
        worst["rm_log_s"] = max(worst["rm_log_s"], rel_error(
            dls, central_difference(lambda v: frozen(F, float(v)), np.array(log_s))))

        # encoder backprop under the metric loss, every 5th batch (parameter sweep is the slow part)
        if b % 5 == 0:
            X = rng.normal(size=(16, 5))
            Fe, cache = encoder_forward(enc, X)
            be = pair_terms(Fe, Y, state, cfg)
            Me, _ = mine_mask(be, state, cfg)
            rm_loss(be)
            g = encoder_backward(enc, cache, rm_loss_backward(be, Fe)[0]).arrays()
            num = []
            for k, arr in enumerate(enc.arrays()):
                def f(v, k=k):
                    q = enc.copy()
                    q.arrays()[k][...] = v
                    return frozen_enc(q, X, Y, state, cfg, Me)
                num.append(central_difference(f, arr).ravel())
            # scaled over the whole parameter vector: the output bias gradient is identically zero
            worst["encoder"] = max(worst["encoder"], rel_error(np.concatenate([a.ravel() for a in g]),
                                                               np.concatenate(num)))

        Yhat = rng.normal(size=(16, d_y))
        for name, fn in (("mse", mse_loss), ("l1", l1_loss)):
            _, g = fn(Yhat, Y)
            worst[name] = max(worst[name], rel_error(g, central_difference(lambda v: fn(v, Y)[0], Yhat)))
        head = HeadParams(rng.normal(size=(d_y, 4)), rng.normal(size=d_y))
        _, gY = mse_loss(head_forward(head, F), Y)
        dFh, dW, _ = head_backward(head, F, gY)
        worst["head"] = max(worst["head"], rel_error(
            dFh, central_difference(lambda v: mse_loss(head_forward(head, v), Y)[0], F)), rel_error(
            dW, central_difference(lambda v: mse_loss(head_forward(HeadParams(v, head.bias), F), Y)[0],
                                   head.weight)))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-5 and elapsed < 60
    acceptance(1, ok, f"max rel err {max(worst.values()):.2e} (<=1e-5), {elapsed:.1f}s (<60s) "
               + " ".join(f"{k}={v:.1e}" for k, v in worst.items()))
    assert ok, worst


def frozen_enc(params, X, Y, state, cfg, M):
    F, _ = encoder_forward(params, X)
    b = pair_terms(F, Y, state, cfg)
    b.M = M
    return rm_loss(b)


# ---------------------------------------------------------------- criterion 2
def test_brute_force_loss_oracle(acceptance):
    rng = np.random.default_rng(77)
    cases = [(FIXTURE_A_F, FIXTURE_A_Y, 0.0, LossConfig(sigma=1.0, alpha=0.1), None)]
    for i in range(20):
        B = int(rng.integers(2, 17))
        cases.append((rng.normal(size=(B, 4)), rng.normal(size=(B, 1 + i % 2)), float(rng.normal() * 0.5),
                      LossConfig(sigma=float(rng.uniform(0.25, 1.5)), alpha=float(rng.uniform(0, 0.3)),
                                 mining_enabled=bool(i % 4)),
                      None if i % 3 == 0 else float(rng.uniform(0, 1.5))))
    worst = 0.0
    masks_equal = True
    for F, Y, log_s, cfg, prev in cases:
        state = LossState(log_s=log_s, ema_lbar=prev)
        batch = pair_terms(F, Y, state, cfg)
        M, new = mine_mask(batch, state, cfg)
        L = rm_loss(batch)
        ref = brute_rm_loss(np.asarray(F).tolist(), np.asarray(Y).tolist(), log_s, cfg.sigma, cfg.alpha, prev,
                            mining=cfg.mining_enabled)
        off = ~np.eye(len(F), dtype=bool)
        worst = max(worst, abs(L - ref["loss"]), abs(new.ema_lbar - ref["lbar"]),
                    float(np.max(np.abs(batch.D - ref["D"]))), float(np.max(np.abs(batch.W[off] - ref["W"][off]))))
        masks_equal &= bool(np.array_equal(M, ref["M"]))
    ok = worst <= 1e-12 and masks_equal
    acceptance(2, ok, f"Fixture A + 20 random batches: max abs diff {worst:.1e} (<=1e-12), masks identical={masks_equal}")
    assert ok


# ---------------------------------------------------------------- criterion 3 (+ run reused by 7)
@pytest.fixture(scope="module")
def isometry_run():
    ds = generate("curve1d", n=2000, d_x=10, noise_sd=0.01, seed=0)
    t0 = time.perf_counter()
    res = train(ds, TrainConfig(mode="rm", iterations=5000, batch_size=64, lr=1e-4, eval_every=250,
                                d_f=8, seed=0, loss=LossConfig(sigma=0.5, alpha=0.1)))
    return ds, res, time.perf_counter() - t0


@pytest.mark.slow
def test_isometry_emergence(acceptance, isometry_run):
    ds, res, elapsed = isometry_run
    ev = evaluate(res, ds)
    F = ev.F_eval
    iu = np.triu_indices(len(F), 1)
    _, Y_test, _ = ds.part("test")
    rho = pearson(res.loss_state.s * pairwise_euclidean(F)[iu], pairwise_euclidean(Y_test)[iu])
    ok = ev.report.rv <= 0.05 and rho >= 0.97
    acceptance(3, ok, f"test RV {ev.report.rv:.4g} (<=0.05, k={ev.report.rv_best_k}), "
               f"pearson(s*|df|, |dy|) {rho:.4f} (>=0.97), train {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------- criteria 4 and 8
@pytest.fixture(scope="module")
def comparison_runs():
    """Per seed and mode: test metrics at full size and with 10% of the training rows."""
    out = {}
    for seed in SEEDS:
        full = generate("curve1d", seed=seed, **COMPARE)
        small = subsample(full, 0.1, seed, splits=("train",))
        _, _, Yraw_te = full.part("test")
        _, _, Yraw_tr = full.part("train")
        out[seed] = {"mean_mae": mae(np.full_like(Yraw_te, Yraw_tr.mean(axis=0)), Yraw_te)}
        for mode in ("rm", "mse"):
            for tag, ds in (("full", full), ("10pct", small)):
                res = train(ds, TrainConfig(mode=mode, seed=seed, **COMPARE_TRAIN))
                out[seed][mode, tag] = evaluate(res, ds).report
    return out


@pytest.mark.slow
def test_directional_vs_baselines(acceptance, comparison_runs):
    wins, lines = 0, []
    for seed, r in comparison_runs.items():
        rm, ms = r["rm", "full"], r["mse", "full"]
        a = rm.mae < r["mean_mae"]
        b = rm.rv <= ms.rv and rm.d5 <= ms.d5
        wins += a and b
        lines.append(f"s{seed}:{'ok' if a and b else 'no'}(rv {rm.rv:.4f}/{ms.rv:.4f}, d5 {rm.d5:.4f}/{ms.d5:.4f})")
    ok = wins >= 4
    acceptance(4, ok, f"{wins}/5 seeds with RM MAE < mean-predictor and RV, D5 <= MSE embedding (need >=4); "
               + " ".join(lines))
    assert ok


@pytest.mark.slow
def test_data_efficiency_direction(acceptance, comparison_runs):
    wins, lines = 0, []
    for seed, r in comparison_runs.items():
        rm_ratio = r["rm", "10pct"].mae / r["rm", "full"].mae
        ms_ratio = r["mse", "10pct"].mae / r["mse", "full"].mae
        wins += rm_ratio <= ms_ratio
        lines.append(f"s{seed}:{rm_ratio:.2f}/{ms_ratio:.2f}"
                     f"(10% MAE {r['rm', '10pct'].mae:.4f}/{r['mse', '10pct'].mae:.4f})")
    ok = wins >= 3
    acceptance(8, ok, f"{wins}/5 seeds with RM degradation ratio <= MSE's (need >=3); rm/mse " + " ".join(lines))
    assert ok


# ---------------------------------------------------------------- criterion 5
def test_geodesic_oracle(acceptance):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(5, 51))
        g = knn_graph(rng.normal(size=(n, int(rng.integers(1, 4)))), int(rng.integers(1, min(6, n))))
        got, ref = geodesic_distances(g).distances, floyd_warshall(g.weights)
        fin = np.isfinite(ref)
        same_inf = np.array_equal(np.isinf(got), ~fin)
        worst = max(worst, float(np.max(np.abs(got[fin] - ref[fin]))) if same_inf else math.inf)
    F = rng.normal(size=(25, 3))
    complete_exact = bool(np.array_equal(geodesic_distances(knn_graph(F, 24)).distances, pairwise_euclidean(F)))
    ok = worst <= 1e-12 and complete_exact
    acceptance(5, ok, f"Dijkstra vs Floyd-Warshall on 20 graphs: max diff {worst:.1e} (<=1e-12); "
               f"complete graph == Euclidean exactly: {complete_exact}")
    assert ok


# ---------------------------------------------------------------- criterion 6
def test_nn_prediction_contracts(acceptance):
    errs = {}
    y, _ = predict(EmbeddingIndex([[0.0, 0.0], [4.0, 0.0]], [[3.5], [9.0]], 1.0), [0.7, 0.1])
    errs["single-neighbour"] = abs(y[0] - 3.5)
    y, _ = predict(EmbeddingIndex([[-0.4], [0.4]], [[1.0], [2.0]], 1.0), [0.0])
    errs["symmetry"] = abs(y[0] - 1.5)
    r = 0.6
    y, _ = predict(EmbeddingIndex([[0.0], [r / 3]], [[1.0], [2.0]], r), [0.0])
    errs["worked example"] = abs(y[0] - (1 + 2 * math.exp(-0.5)) / (1 + math.exp(-0.5)))
    rng = np.random.default_rng(6)
    hull = 0.0
    for _ in range(200):
        F, Y = rng.normal(size=(30, 2)), rng.normal(size=(30, 2))
        q = rng.normal(size=2)
        y, flag = predict(EmbeddingIndex(F, Y, 0.8), q)
        d = np.linalg.norm(F - q, axis=1)
        nb = Y[d <= 0.8] if not flag else Y[[np.argmin(d)]]
        hull = max(hull, float(np.max(np.maximum(nb.min(axis=0) - y, y - nb.max(axis=0)))))
    errs["convex hull overshoot"] = max(hull, 0.0)
    ok = all(v <= 1e-12 for v in errs.values()) and abs(
        (1 + 2 * math.exp(-0.5)) / (1 + math.exp(-0.5)) - 1.37754) < 5e-6
    acceptance(6, ok, "; ".join(f"{k} {v:.1e}" for k, v in errs.items()) + " (all <=1e-12)")
    assert ok


# ---------------------------------------------------------------- criterion 7
@pytest.mark.slow
def test_mining_behaviour(acceptance, isometry_run):
    _, res, _ = isometry_run
    log = res.log
    frac_on = [r["selected_fraction"] for r in log[1:]]
    inside = all(0 < f < 1 for f in frac_on)
    ema_err = max(abs(log[k]["lbar"] - (0.9 * log[k - 1]["lbar"] + 0.1 * log[k]["batch_mean"]))
                  for k in range(1, len(log)))
    first_ok = log[0]["lbar"] == log[0]["batch_mean"]
    ds = generate("curve1d", n=2000, d_x=10, noise_sd=0.01, seed=0)
    off = train(ds, TrainConfig(mode="rm", iterations=300, lr=1e-4, eval_every=300, seed=0,
                                loss=LossConfig(mining_enabled=False)))
    all_one = all(r["selected_fraction"] == 1.0 for r in off.log)
    ok = inside and all_one and ema_err <= 1e-12 and first_ok
    acceptance(7, ok, f"mining on: fraction in (0,1) for iterations 2..{len(log)}: {inside} "
               f"(range {min(frac_on):.3f}-{max(frac_on):.3f}); mining off all 1: {all_one}; "
               f"EMA residual {ema_err:.1e} (<=1e-12); l-bar seeded by first batch mean: {first_ok}")
    assert ok


# ---------------------------------------------------------------- criterion 9
DET_CONFIG = {
    "seed": 11,
    "dataset": {"kind": "curve1d", "n": 300, "d_x": 8, "noise_sd": 0.05},
    "train": {"mode": "rm", "iterations": 200, "batch_size": 32, "lr": 0.001, "eval_every": 50,
              "hidden": [32, 32], "d_f": 4},
    "metrics": {"k_candidates": [5, 10]},
    "ablation": {"sigmas": [0.5, "inf"], "alphas": [0.0, 0.1], "mining": [True, False]},
}


def _tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_cli_determinism(acceptance, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(DET_CONFIG))
    results = {}
    for cmd in ("generate", "train", "ablate", "evaluate"):
        trees = []
        for rep in ("a", "b"):
            out = tmp_path / f"{cmd}_{rep}"
            if cmd == "evaluate":
                argv = ["evaluate", "--checkpoint", str(tmp_path / f"train_{rep}" / "checkpoint.json"), "--out", str(out)]
            else:
                argv = [cmd, "--config", str(cfg), "--out", str(out)]
            assert main(argv) == 0
            trees.append(_tree(out))
        results[cmd] = trees[0] == trees[1] and len(trees[0]) > 0
    ok = all(results.values())
    acceptance(9, ok, "bitwise-identical outputs on rerun: " + ", ".join(f"{k}={v}" for k, v in results.items()))
    assert ok
