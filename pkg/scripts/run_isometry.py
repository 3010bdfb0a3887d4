"""Train the metric-regression encoder on a low-noise curve and check that embedding distances track label distances.

    python3 scripts/run_isometry.py [--config configs/isometry.json] [--seed 0]
"""
import argparse
import json
from pathlib import Path

import numpy as np

from metricreg.experiment import ExperimentConfig, build_dataset, evaluate
from metricreg.linalg import pairwise_euclidean, pearson
from metricreg.trainer import train

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "isometry.json"))
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    raw = json.loads(Path(args.config).read_text())
    cfg = ExperimentConfig.from_dict(raw, seed=args.seed, base_dir=Path(args.config).parent)
    ds = build_dataset(cfg.dataset, cfg.seed)
    res = train(ds, cfg.train)
    ev = evaluate(res, ds, cfg.k_candidates)
    iu = np.triu_indices(len(ev.F_eval), 1)
    rho = pearson(res.loss_state.s * pairwise_euclidean(ev.F_eval)[iu], pairwise_euclidean(ev.Y_eval_raw)[iu])
    print(json.dumps({"seed": cfg.seed, "best_iteration": res.best_iteration, "s": res.loss_state.s,
                      "rv": ev.report.rv, "rv_best_k": ev.report.rv_best_k, "pearson": rho,
                      "test_mae": ev.report.mae}, indent=2))


if __name__ == "__main__":
    main()
