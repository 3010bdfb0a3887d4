"""Loss-hyperparameter ablation through the CLI; writes ablation.csv under --out.

    python3 scripts/run_ablation.py [--config configs/ablation.json] [--out runs/ablation] [--seed 0]
"""
import argparse
import sys
from pathlib import Path

from metricreg.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "ablation.json"))
    ap.add_argument("--out", default="runs/ablation")
    ap.add_argument("--seed", type=int)
    a = ap.parse_args()
    argv = ["ablate", "--config", a.config, "--out", a.out] + ([] if a.seed is None else ["--seed", str(a.seed)])
    code = cli(argv)
    if code == 0:
        print((Path(a.out) / "ablation.csv").read_text(), end="")
    sys.exit(code)
