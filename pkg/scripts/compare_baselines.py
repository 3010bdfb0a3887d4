"""Metric loss vs MSE head vs mean predictor across seeds, at full size and with 10% of the training rows.

Prints one row per (seed, mode, size) and the per-seed degradation ratios.

    python3 scripts/compare_baselines.py [--seeds 0 1 2 3 4] [--noise 0.1] [--iterations 5000] [--lr 1e-3]
"""
import argparse

import numpy as np

from metricreg.data import generate, subsample
from metricreg.experiment import evaluate
from metricreg.loss import LossConfig
from metricreg.metrics import mae
from metricreg.trainer import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d-x", type=int, default=10)
    ap.add_argument("--noise", type=float, default=0.1)
    ap.add_argument("--iterations", type=int, default=5000)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--fraction", type=float, default=0.1)
    ap.add_argument("--modes", nargs="+", default=["rm", "mse"])
    args = ap.parse_args()

    print(f"{'seed':>4} {'mode':>4} {'size':>5} {'mae':>9} {'r2':>7} {'d5':>9} {'rv':>9} {'k':>3}")
    for seed in args.seeds:
        full = generate("curve1d", n=args.n, d_x=args.d_x, noise_sd=args.noise, seed=seed)
        small = subsample(full, args.fraction, seed, splits=("train",))
        _, _, y_tr = full.part("train")
        _, _, y_te = full.part("test")
        print(f"{seed:>4} {'mean':>4} {'full':>5} {mae(np.full_like(y_te, y_tr.mean(axis=0)), y_te):9.5f}")
        maes = {}
        for mode in args.modes:
            for tag, ds in (("full", full), ("small", small)):
                res = train(ds, TrainConfig(mode=mode, seed=seed, iterations=args.iterations, lr=args.lr,
                                            loss=LossConfig(sigma=0.5, alpha=0.1)))
                r = evaluate(res, ds).report
                maes[mode, tag] = r.mae
                print(f"{seed:>4} {mode:>4} {tag:>5} {r.mae:9.5f} {r.r2:7.4f} {r.d5:9.5f} {r.rv:9.5f} {r.rv_best_k:>3}")
        print("     degradation " + " ".join(
            f"{m}={maes[m, 'small'] / maes[m, 'full']:.3f}" for m in args.modes))


if __name__ == "__main__":
    main()
