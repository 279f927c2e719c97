"""Datasets: CSV ingestion, standardization, 80/20 split, synthetic targets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .network import NetworkParams, NetworkShape, Sample, forward_batch
from .pwp import leaky_hard_tanh


class DataError(ValueError):
    """Unreadable or malformed dataset."""


@dataclass(frozen=True)
class Standardization:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    def inverse(self, X, Y):
        return X * self.x_std + self.x_mean, Y * self.y_std + self.y_mean


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    standardization: Standardization | None = None
    provenance: tuple = ("memory",)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=np.float64))
        if self.X.shape[0] != self.Y.shape[0]:
            raise DataError("X and Y must have the same number of rows")

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def d_in(self):
        return self.X.shape[1]

    @property
    def d_out(self):
        return self.Y.shape[1]

    @property
    def samples(self):
        return [Sample(x, y) for x, y in zip(self.X, self.Y)]

    def subset(self, idx):
        return Dataset(self.X[idx], self.Y[idx], self.standardization, self.provenance)


@dataclass(frozen=True)
class Split:
    train_indices: np.ndarray
    val_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))


def load_csv(path, x_columns, y_columns, has_header=False):
    """Read comma-separated decimals; selected columns become inputs/outputs.

    Column indices are 0-based.  Errors name the 1-based line and the column.
    """
    x_columns = list(x_columns)
    y_columns = list(y_columns)
    if not x_columns or not y_columns:
        raise DataError("need at least one x column and one y column")
    wanted = x_columns + y_columns
    rows = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if has_header and lineno == 1:
                continue
            if not rec or all(not c.strip() for c in rec):
                continue
            if max(wanted) >= len(rec):
                raise DataError(
                    f"line {lineno}: missing column {max(wanted)} (row has {len(rec)} columns)"
                )
            vals = []
            for c in wanted:
                try:
                    v = float(rec[c])
                except ValueError:
                    raise DataError(f"line {lineno}, column {c}: non-numeric value {rec[c]!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"line {lineno}, column {c}: non-finite value {rec[c]!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.array(rows)
    nx = len(x_columns)
    return Dataset(arr[:, :nx], arr[:, nx:], None, ("csv", str(path)))


def _moments(A, what):
    mean = A.mean(axis=0)
    std = np.sqrt(np.mean((A - mean) ** 2, axis=0))
    bad = np.nonzero(std <= 1e-300)[0]
    if bad.size:
        raise DataError(f"{what} dimension {int(bad[0])} has zero variance")
    return mean, std


def standardize(dataset):
    """Shift/scale every input and output dimension to mean 0, variance 1."""
    if dataset.n_samples < 2:
        raise DataError("standardization needs at least 2 samples")
    xm, xs = _moments(dataset.X, "input")
    ym, ys = _moments(dataset.Y, "output")
    X = (dataset.X - xm) / xs
    Y = (dataset.Y - ym) / ys
    prev = dataset.standardization
    if prev is not None:
        # compose with an earlier transform so inverse() still reaches raw units
        xm, xs = prev.x_mean + prev.x_std * xm, prev.x_std * xs
        ym, ys = prev.y_mean + prev.y_std * ym, prev.y_std * ys
    return Dataset(X, Y, Standardization(xm, xs, ym, ys), dataset.provenance)


def split_80_20(S, seed):
    """Seeded permutation; the first round(0.8*S) indices train, the rest validate."""
    if S < 5:
        raise DataError("need at least 5 samples to split")
    perm = np.random.default_rng([seed, 3]).permutation(S)
    n_train = int(round(0.8 * S))
    return Split(np.sort(perm[:n_train]), np.sort(perm[n_train:]))


def triangle_wave(t):
    """Period-1 triangle wave with range [-1, 1]."""
    return 4.0 * np.abs(t - np.floor(t + 0.5)) - 1.0


@dataclass(frozen=True)
class Terrain:
    """Sum of triangle waves of random projections of the input."""

    directions: np.ndarray
    freqs: np.ndarray
    phases: np.ndarray
    amps: np.ndarray

    @classmethod
    def random(cls, d_in, n_waves, rng):
        dirs = rng.normal(size=(n_waves, d_in))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return cls(
            dirs,
            rng.uniform(0.5, 3.0, size=n_waves),
            rng.uniform(0.0, 1.0, size=n_waves),
            rng.uniform(0.3, 1.0, size=n_waves),
        )

    def __call__(self, X):
        proj = X @ self.directions.T
        return triangle_wave(proj * self.freqs + self.phases) @ self.amps


def teacher_network(d_in, seed, d_hidden=8, d_out=1):
    rng = np.random.default_rng([seed, 5])
    shape = NetworkShape(d_in, d_hidden, d_out)
    s1 = math.sqrt(6.0 / d_in)
    s2 = math.sqrt(6.0 / d_hidden)
    params = NetworkParams(
        rng.uniform(-s1, s1, (d_hidden, d_in)),
        rng.uniform(-s1, s1, d_hidden),
        rng.uniform(-s2, s2, (d_out, d_hidden)),
        rng.uniform(-s2, s2, d_out),
    )
    return shape, params


def synthetic_rugged(kind, S, d_in=2, seed=0, noise=None, n_waves=8, standardized=True):
    """Seeded synthetic regression data.

    ``teacher_pwl``: outputs of a random network with the same activation
    (realizable; noiseless by default).  ``terrain``: sum of ``n_waves``
    triangle waves of random input projections plus noise (default 0.01).

    With ``standardized=False`` the raw (unscaled) data is returned, which for
    ``teacher_pwl`` is exactly fit by the teacher's parameters.
    """
    if S < 1:
        raise DataError("S must be >= 1")
    rng = np.random.default_rng([seed, 4])
    X = rng.normal(size=(S, d_in))
    if kind == "teacher_pwl":
        noise = 0.0 if noise is None else noise
        _, params = teacher_network(d_in, seed)
        Y = forward_batch(params, X, leaky_hard_tanh())
    elif kind == "terrain":
        noise = 0.01 if noise is None else noise
        terrain = Terrain.random(d_in, n_waves, np.random.default_rng([seed, 6]))
        Y = terrain(X)[:, None]
    else:
        raise DataError(f"unknown synthetic kind {kind!r}")
    if noise:
        # noise is specified in standardized output units
        Y = Y + noise * Y.std(axis=0) * rng.normal(size=Y.shape)
    ds = Dataset(X, Y, None, ("synthetic", kind, int(seed)))
    if standardized and S >= 2:
        ds = standardize(ds)
    return ds


def terrain_function(d_in, seed, n_waves=8):
    """The noiseless raw target used by ``synthetic_rugged('terrain', ...)``."""
    return Terrain.random(d_in, n_waves, np.random.default_rng([seed, 6]))


def save_dataset(dataset, path):
    """CSV of inputs then outputs, with a ``.std`` sidecar of constants."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(dataset.d_in)] + [f"y{i}" for i in range(dataset.d_out)])
        for x, y in zip(dataset.X, dataset.Y):
            w.writerow([f"{v:.17g}" for v in np.concatenate([x, y])])
    st = dataset.standardization
    if st is not None:
        with open(str(path) + ".std", "w") as fh:
            for name, m, s in [("x", st.x_mean, st.x_std), ("y", st.y_mean, st.y_std)]:
                for i, (a, b) in enumerate(zip(m, s)):
                    fh.write(f"{name}{i} {a:.17g} {b:.17g}\n")


def load_dataset(path, d_in):
    import os

    with open(path, newline="") as fh:
        ncols = len(next(csv.reader(fh)))
    ds = load_csv(path, range(d_in), range(d_in, ncols), has_header=True)
    side = str(path) + ".std"
    if os.path.exists(side):
        consts = {}
        with open(side) as fh:
            for line in fh:
                name, m, s = line.split()
                consts[name] = (float(m), float(s))
        xm = np.array([consts[f"x{i}"][0] for i in range(d_in)])
        xs = np.array([consts[f"x{i}"][1] for i in range(d_in)])
        ym = np.array([consts[f"y{i}"][0] for i in range(ncols - d_in)])
        ys = np.array([consts[f"y{i}"][1] for i in range(ncols - d_in)])
        ds = Dataset(ds.X, ds.Y, Standardization(xm, xs, ym, ys), ("csv", str(path)))
    return ds


def teacher_params(dataset):
    """Teacher parameters expressed in the dataset's standardized units."""
    if dataset.provenance[:2] != ("synthetic", "teacher_pwl"):
        raise DataError("dataset was not generated by teacher_pwl")
    _, p = teacher_network(dataset.d_in, dataset.provenance[2], d_out=dataset.d_out)
    st = dataset.standardization
    if st is None:
        return p
    w1 = p.w1 * st.x_std[None, :]
    b1 = p.b1 + p.w1 @ st.x_mean
    w2 = p.w2 / st.y_std[:, None]
    b2 = (p.b2 - st.y_mean) / st.y_std
    return NetworkParams(w1, b1, w2, b2)
