"""Synthetic manifold-regression datasets, label normalisation, splits, CSV I/O, batching.

Manifolds (version 1, fixed so results stay comparable):

curve1d, label y in [0, 1]::

    x_0 = tanh(3 (y - 1/2)) / tanh(3/2)
    x_j = sin(w_j y + p_j)      j >= 1, j odd
    x_j = cos(w_j y + p_j)      j >= 2, j even
    w_j = 1.5 pi sqrt(j + 1),   p_j = j * 0.6180339887498949

x_0 is strictly increasing in y, so the curve is injective for any d_x.

surface2d, label (u, v) in [0, 1]^2 (needs d_x >= 2)::

    x_0 = g(u),  x_1 = g(v)   with g(t) = tanh(3 (t - 1/2)) / tanh(3/2)
    x_j = sin(w_j u + q_j v + p_j)  for j >= 2,  q_j = 1.1 pi sqrt(j + 2)

Noise is isotropic Gaussian with standard deviation ``noise_sd`` on x.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .encoder import make_rng
from .errors import DegenerateInputError, InvalidInputError

MANIFOLD_VERSION = 1
KINDS = ("curve1d", "surface2d")
SPLITS = ("train", "val", "test")
GOLDEN = 0.6180339887498949


def _monotone(t):
    return np.tanh(3.0 * (t - 0.5)) / np.tanh(1.5)


def curve1d(y, d_x):
    y = np.asarray(y, dtype=np.float64).ravel()
    X = np.empty((y.size, d_x))
    X[:, 0] = _monotone(y)
    for j in range(1, d_x):
        w = 1.5 * math.pi * math.sqrt(j + 1)
        trig = np.sin if j % 2 else np.cos
        X[:, j] = trig(w * y + j * GOLDEN)
    return X


def surface2d(Y, d_x):
    Y = np.asarray(Y, dtype=np.float64).reshape(-1, 2)
    if d_x < 2:
        raise InvalidInputError("surface2d needs d_x >= 2")
    u, v = Y[:, 0], Y[:, 1]
    X = np.empty((Y.shape[0], d_x))
    X[:, 0] = _monotone(u)
    X[:, 1] = _monotone(v)
    for j in range(2, d_x):
        w = 1.5 * math.pi * math.sqrt(j + 1)
        q = 1.1 * math.pi * math.sqrt(j + 2)
        X[:, j] = np.sin(w * u + q * v + j * GOLDEN)
    return X


@dataclass(frozen=True)
class NormParams:
    mode: str            # "zscore" or "affine"
    mean: tuple
    scale: tuple

    def apply(self, Y_raw):
        return (np.asarray(Y_raw, dtype=np.float64) - np.asarray(self.mean)) / np.asarray(self.scale)

    def invert(self, Y):
        return np.asarray(Y, dtype=np.float64) * np.asarray(self.scale) + np.asarray(self.mean)

    def to_dict(self):
        return {"mode": self.mode, "mean": list(self.mean), "scale": list(self.scale)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["mode"], tuple(float(v) for v in d["mean"]), tuple(float(v) for v in d["scale"]))


def normalize_labels(Y_raw, mode="zscore", center=None, half_range=None, fit_rows=None):
    """Return ``(Y, NormParams)``.

    ``mode="zscore"`` uses the (population) mean and standard deviation of
    ``Y_raw[fit_rows]``; ``mode="affine"`` maps ``(y - center) / half_range``.
    """
    Y_raw = np.asarray(Y_raw, dtype=np.float64)
    Y_raw = Y_raw.reshape(Y_raw.shape[0], -1)
    if mode == "zscore":
        ref = Y_raw if fit_rows is None else Y_raw[fit_rows]
        sd = ref.std(axis=0)
        if np.any(sd == 0):
            raise DegenerateInputError("cannot z-score a label dimension with zero variance")
        params = NormParams("zscore", tuple(ref.mean(axis=0).tolist()), tuple(sd.tolist()))
    elif mode == "affine":
        if center is None or half_range is None or not half_range > 0:
            raise InvalidInputError("affine mode needs center and a positive half_range")
        d = Y_raw.shape[1]
        params = NormParams("affine", (float(center),) * d, (float(half_range),) * d)
    else:
        raise InvalidInputError(f"unknown normalisation mode {mode!r}")
    return params.apply(Y_raw), params


@dataclass
class Dataset:
    X: np.ndarray
    Y_raw: np.ndarray
    Y: np.ndarray
    split: np.ndarray          # array of "train" / "val" / "test"
    norm: NormParams
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def d_x(self):
        return self.X.shape[1]

    @property
    def d_y(self):
        return self.Y_raw.shape[1]

    def indices(self, name):
        return np.flatnonzero(self.split == name)

    def part(self, name):
        """``(X, Y, Y_raw)`` rows of one split."""
        idx = self.indices(name)
        return self.X[idx], self.Y[idx], self.Y_raw[idx]


def split_sizes(n, fractions):
    fr = np.asarray(fractions, dtype=np.float64)
    if fr.shape != (3,) or np.any(fr < 0) or not math.isclose(fr.sum(), 1.0, abs_tol=1e-9):
        raise InvalidInputError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    raw = fr * n
    sizes = np.floor(raw).astype(int)
    # largest remainder, earlier split wins ties
    order = sorted(range(3), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[: n - sizes.sum()]:
        sizes[i] += 1
    if np.any(sizes == 0):
        raise InvalidInputError(f"split {dict(zip(SPLITS, sizes.tolist()))} leaves an empty part at n={n}")
    return sizes.tolist()


def assign_split(n, fractions=(0.7, 0.1, 0.2), seed=0):
    sizes = split_sizes(n, fractions)
    perm = make_rng(seed).permutation(n)
    tags = np.empty(n, dtype=object)
    lo = 0
    for name, size in zip(SPLITS, sizes):
        tags[perm[lo:lo + size]] = name
        lo += size
    return tags.astype(str)


def split(dataset: Dataset, fractions=(0.7, 0.1, 0.2), seed=None) -> Dataset:
    seed = dataset.seed if seed is None else seed
    return replace(dataset, split=assign_split(dataset.X.shape[0], fractions, seed))


def generate(kind="curve1d", n=1000, d_x=10, noise_sd=0.0, seed=0,
             fractions=(0.7, 0.1, 0.2), label_norm="zscore") -> Dataset:
    """Sample a synthetic dataset, split it, and normalise labels on the training rows."""
    if kind not in KINDS:
        raise InvalidInputError(f"unknown dataset kind {kind!r}; expected one of {KINDS}")
    if n < 10:
        raise InvalidInputError("n must be at least 10")
    if d_x < 1 or noise_sd < 0:
        raise InvalidInputError("d_x must be >= 1 and noise_sd >= 0")
    rng = make_rng(seed)
    if kind == "curve1d":
        Y_raw = rng.uniform(0.0, 1.0, size=(n, 1))
        X = curve1d(Y_raw, d_x)
    else:
        Y_raw = rng.uniform(0.0, 1.0, size=(n, 2))
        X = surface2d(Y_raw, d_x)
    X = X + rng.normal(0.0, 1.0, size=X.shape) * noise_sd
    tags = assign_split(n, fractions, seed)
    Y, norm = _normalise(Y_raw, tags, label_norm)
    meta = {"kind": kind, "n": n, "d_x": d_x, "d_y": Y_raw.shape[1], "noise_sd": noise_sd,
            "fractions": list(fractions), "manifold_version": MANIFOLD_VERSION}
    return Dataset(X, Y_raw, Y, tags, norm, int(seed), meta)


def _normalise(Y_raw, tags, label_norm):
    if isinstance(label_norm, dict):
        return normalize_labels(Y_raw, "affine", label_norm["center"], label_norm["half_range"])
    return normalize_labels(Y_raw, label_norm, fit_rows=np.flatnonzero(tags == "train"))


def subsample(dataset: Dataset, fraction, seed, splits=("train", "val")) -> Dataset:
    """Keep ``fraction`` of the rows in ``splits`` (at least 2 of each); other rows are untouched.

    Label normalisation is kept from the parent dataset so test metrics stay comparable.
    """
    if not 0 < fraction <= 1:
        raise InvalidInputError("fraction must lie in (0, 1]")
    rng = make_rng(seed)
    if not set(splits) <= {"train", "val"}:
        raise InvalidInputError("only train and val rows can be subsampled")
    keep = [dataset.indices(name) for name in ("train", "val", "test") if name not in splits]
    for name in splits:
        idx = dataset.indices(name)
        m = max(2, int(round(fraction * idx.size)))
        keep.append(np.sort(rng.choice(idx, size=min(m, idx.size), replace=False)))
    rows = np.sort(np.concatenate(keep))
    meta = dict(dataset.meta, subsample_fraction=fraction)
    return Dataset(dataset.X[rows], dataset.Y_raw[rows], dataset.Y[rows], dataset.split[rows],
                   dataset.norm, dataset.seed, meta)


def batch_iter(indices, batch_size, seed, epochs=None):
    """Yield index batches; each epoch is a fresh PCG64 permutation.

    A trailing batch shorter than 2 is dropped (it has no pair). ``epochs=None``
    iterates forever.
    """
    if batch_size < 2:
        raise InvalidInputError("batch_size must be >= 2")
    indices = np.asarray(indices)
    if indices.size < 2:
        raise InvalidInputError("need at least two indices to form a pair")
    rng = make_rng(seed)
    epoch = 0
    while epochs is None or epoch < epochs:
        perm = indices[rng.permutation(indices.size)]
        for lo in range(0, perm.size, batch_size):
            chunk = perm[lo:lo + batch_size]
            if chunk.size >= 2:
                yield chunk
        epoch += 1


def dataset_text(dataset: Dataset):
    """``(csv_text, metadata_json_text)`` for a dataset; floats at 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j}" for j in range(dataset.d_x)] + [f"y{j}" for j in range(dataset.d_y)] + ["split"])
    for x, y, tag in zip(dataset.X, dataset.Y_raw, dataset.split):
        w.writerow([format(v, ".17g") for v in x] + [format(v, ".17g") for v in y] + [tag])
    meta = dict(dataset.meta, seed=dataset.seed, norm_params=dataset.norm.to_dict(),
                d_x=dataset.d_x, d_y=dataset.d_y, n=int(dataset.X.shape[0]))
    return buf.getvalue(), json.dumps(meta, indent=2, sort_keys=True) + "\n"


def save_dataset(dataset: Dataset, path):
    """Write ``path`` (CSV with raw labels) and ``path`` with a ``.json`` suffix (metadata)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    csv_text, meta_text = dataset_text(dataset)
    path.write_text(csv_text)
    path.with_suffix(".json").write_text(meta_text)
    return path, path.with_suffix(".json")


def load_dataset(path) -> Dataset:
    path = Path(path)
    with open(path.with_suffix(".json")) as fh:
        meta = json.load(fh)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d_x = sum(h.startswith("x") for h in header)
    d_y = sum(h.startswith("y") for h in header)
    if header[-1] != "split" or d_x + d_y + 1 != len(header):
        raise InvalidInputError(f"unexpected dataset header {header}")
    vals = np.array([[float(v) for v in r[:-1]] for r in body], dtype=np.float64).reshape(len(body), d_x + d_y)
    if not np.all(np.isfinite(vals)):
        raise InvalidInputError("dataset contains non-finite values")
    tags = np.array([r[-1] for r in body], dtype=str)
    if not set(tags) <= set(SPLITS):
        raise InvalidInputError(f"unknown split tags {set(tags) - set(SPLITS)}")
    norm = NormParams.from_dict(meta["norm_params"])
    Y_raw = vals[:, d_x:]
    extra = {k: v for k, v in meta.items() if k not in ("seed", "norm_params")}
    return Dataset(vals[:, :d_x], Y_raw, norm.apply(Y_raw), tags, norm, int(meta["seed"]), extra)
