"""``metricreg`` command line: generate | train | evaluate | ablate.

Every subcommand takes ``--config PATH`` (JSON) and ``--out DIR``; ``--seed``
overrides the config seed. Outputs are only written after all work has
succeeded, so a failing run leaves the output directory untouched.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint
from .data import dataset_text
from .errors import InvalidInputError, TrainingDivergedError
from .experiment import (ExperimentConfig, ablation_cells, build_dataset, cell_name, cell_row, evaluate,
                         run_cell, DEFAULT_ALPHAS, DEFAULT_SIGMAS)
from .linalg import pca_project
from .trainer import train

log = logging.getLogger("metricreg")

REPORT_FORMAT = "metricreg-report"
REPORT_VERSION = 1


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _commit(out: Path, files: dict):
    """Write the prepared ``{relative name: text}`` mapping under ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        target = out / name
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)


def _load_config(args):
    path = Path(args.config)
    if not path.exists():
        raise InvalidInputError(f"config file {path} not found")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from exc
    return raw, ExperimentConfig.from_dict(raw, seed=args.seed, base_dir=path.parent)


def _dataset_files(ds):
    csv_text, meta_text = dataset_text(ds)
    return {"dataset.csv": csv_text, "dataset.json": meta_text}


def cmd_generate(args):
    _, cfg = _load_config(args)
    if "path" in cfg.dataset:
        raise InvalidInputError("generate needs a dataset kind, not a path")
    ds = build_dataset(cfg.dataset, cfg.seed)
    _commit(Path(args.out), _dataset_files(ds))
    counts = {t: int((ds.split == t).sum()) for t in ("train", "val", "test")}
    print(f"wrote {args.out}/dataset.csv: kind={ds.meta['kind']} n={len(ds.X)} d_x={ds.d_x} "
          f"d_y={ds.d_y} splits={counts}")


def _train_files(cfg, ds, result):
    files = {
        "config.json": _dumps(cfg.raw),
        "checkpoint.json": json.dumps(checkpoint.to_dict(result, cfg.raw), sort_keys=True) + "\n",
        "train_log.jsonl": "".join(json.dumps(r, sort_keys=True) + "\n" for r in result.log),
        "radius.json": _dumps({"radius": result.radius, "best_iteration": result.best_iteration,
                               "best_val_mae": result.best_val_mae}),
    }
    keys = ["iteration", "loss", "lbar", "s", "selected_fraction", "val_mae", "radius"]
    files["train_curve.csv"] = _csv(keys, ([r.get(k, "") for k in keys] for r in result.log))
    if "path" not in cfg.dataset:
        files.update(_dataset_files(ds))
    return files


def cmd_train(args):
    _, cfg = _load_config(args)
    ds = build_dataset(cfg.dataset, cfg.seed)
    log.info("training mode=%s iterations=%d on %d train rows", cfg.train.mode, cfg.train.iterations,
             int((ds.split == "train").sum()))
    result = train(ds, cfg.train)
    _commit(Path(args.out), _train_files(cfg, ds, result))
    print(f"best iteration {result.best_iteration}: val MAE {result.best_val_mae:.6g}"
          + (f", radius {result.radius:.6g}" if result.radius is not None else ""))


def _report(ev, model, split, config):
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "mode": model.mode if hasattr(model, "mode") else model.config.mode,
        "split": split,
        "radius": model.radius,
        "metrics": ev.report.to_dict(),
        "rv_per_k": {str(k): v for k, v in sorted(ev.rv_per_k.items())},
        "config": config,
    }


def cmd_evaluate(args):
    raw = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        if set(raw) - {"checkpoint", "dataset", "metrics", "split"}:
            raise InvalidInputError(f"unknown evaluate config field(s): {sorted(set(raw) - {'checkpoint', 'dataset', 'metrics', 'split'})}")
    base = Path(args.config).parent if args.config else Path(".")
    ck_path = args.checkpoint or (raw.get("checkpoint") and str(base / raw["checkpoint"]))
    if not ck_path or not Path(ck_path).exists():
        raise InvalidInputError(f"checkpoint not found: {ck_path}")
    model = checkpoint.load(ck_path)
    train_cfg = model.config
    ds_spec = raw.get("dataset")
    if args.dataset:
        ds_spec = {"path": args.dataset}
    if ds_spec is None:
        ds_spec = train_cfg["dataset"]
    if "path" in ds_spec and not Path(ds_spec["path"]).is_absolute() and args.config and not args.dataset:
        ds_spec = dict(ds_spec, path=str(base / ds_spec["path"]))
    if "path" in ds_spec and not Path(ds_spec["path"]).exists():
        raise InvalidInputError(f"dataset not found: {ds_spec['path']}")
    seed = args.seed if args.seed is not None else train_cfg["seed"]
    ks = raw.get("metrics", {}).get("k_candidates", train_cfg.get("metrics", {}).get("k_candidates"))
    split = args.split or raw.get("split", "test")
    ds = build_dataset(ds_spec, seed)
    ev = evaluate(model, ds, ks, split)

    resolved = {"checkpoint_config": train_cfg, "dataset": ds_spec, "split": split,
                "metrics": {"k_candidates": ks}}
    d_f = ev.F_eval.shape[1]
    d_y = ev.Y_eval_raw.shape[1]
    emb_rows = [list(f) + list(y) + list(yh) for f, y, yh in zip(ev.F_eval, ev.Y_eval_raw, ev.Yhat_raw)]
    proj, _ = pca_project(ev.F_eval, 3)
    pca_rows = [list(p) + list(y) for p, y in zip(proj, ev.Y_eval_raw)]
    files = {
        "report.json": _dumps(_report(ev, model, split, resolved)),
        "embeddings.csv": _csv([f"f{j}" for j in range(d_f)] + [f"y{j}" for j in range(d_y)]
                               + [f"yhat{j}" for j in range(d_y)], emb_rows),
        "pca3d.csv": _csv(["pc0", "pc1", "pc2"] + [f"y{j}" for j in range(d_y)], pca_rows),
    }
    _commit(Path(args.out), files)
    m = ev.report
    print(f"{split}: MAE {m.mae:.6g}  R2 {m.r2:.6g}  D5 {m.d5:.6g}  RV {m.rv:.6g} (k={m.rv_best_k})")


def cmd_ablate(args):
    _, cfg = _load_config(args)
    ds = build_dataset(cfg.dataset, cfg.seed)
    abl = cfg.ablation
    cells = ablation_cells(cfg.train.loss, abl.get("sigmas", DEFAULT_SIGMAS),
                           abl.get("alphas", DEFAULT_ALPHAS), abl.get("mining", (True, False)))
    files, rows = {"config.json": _dumps(cfg.raw)}, []
    for loss_cfg in cells:
        name = cell_name(loss_cfg)
        log.info("ablation cell %s", name)
        result, ev = run_cell(ds, cfg.train, loss_cfg, cfg.k_candidates)
        rows.append(cell_row(loss_cfg, result, ev))
        files[f"cells/{name}/train_log.jsonl"] = "".join(json.dumps(r, sort_keys=True) + "\n" for r in result.log)
        files[f"cells/{name}/report.json"] = _dumps(_report(ev, result, "test", dict(cfg.raw, cell=name)))
    header = list(rows[0])
    files["ablation.csv"] = _csv(header, ([r[k] for k in header] for r in rows))
    _commit(Path(args.out), files)
    print(files["ablation.csv"], end="")


def build_parser():
    p = argparse.ArgumentParser(prog="metricreg", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (("generate", cmd_generate, True), ("train", cmd_train, True),
                                   ("evaluate", cmd_evaluate, False), ("ablate", cmd_ablate, True)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=needs_config)
        sp.add_argument("--out", required=True)
        sp.add_argument("--seed", type=int, default=None)
        sp.set_defaults(func=fn)
        if name == "evaluate":
            sp.add_argument("--checkpoint")
            sp.add_argument("--dataset", help="dataset CSV; defaults to the checkpoint's dataset spec")
            sp.add_argument("--split", choices=("train", "val", "test"))
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except TrainingDivergedError as exc:
        print(f"error: {exc}; diagnostic: {json.dumps(exc.record)}", file=sys.stderr)
        return 3
    except (InvalidInputError, ValueError, RuntimeError, FloatingPointError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
