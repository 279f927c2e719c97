"""Message Passing Descent trainer.

One MPD step picks a single parameter, builds the loss over a mini-batch as
an exact piecewise quadratic in that parameter, and jumps to its global
minimum.  Every other parameter stays frozen.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels, worker_count
from .data import split_80_20
from .network import (
    NetworkParams,
    NetworkShape,
    ParamRef,
    Sample,
    build_message,
    hidden_pre,
    loss,
    param_count,
)
from .pwp import PwpFunction, _merge_sorted, global_min, leaky_hard_tanh, sum_pwp

SWEEP_MODES = ("permutation_sweep", "random_with_replacement")


@dataclass(frozen=True)
class Growth:
    """Mini-batch growth: from ``start_step`` on, multiply by ``factor`` every
    ``every`` batch steps, never beyond ``cap`` (``None`` = dataset size)."""

    start_step: int = 200
    factor: float = 2.0
    cap: int | None = None
    every: int = 100

    def __post_init__(self):
        if self.factor < 1:
            raise ValueError("growth factor must be >= 1")
        if self.every < 1 or self.start_step < 0:
            raise ValueError("invalid growth schedule")

    def size_at(self, base, step, n):
        """Mini-batch size for 0-based batch step ``step`` on ``n`` samples."""
        cap = n if self.cap is None else min(self.cap, n)
        if step < self.start_step:
            return min(base, n)
        k = 1 + (step - self.start_step) // self.every
        return int(min(cap, max(base, math.floor(base * self.factor**k))))


@dataclass(frozen=True)
class TrainConfig:
    total_batch_steps: int = 50
    minibatch_size: int = 2048
    minibatch_growth: Growth | None = field(default_factory=Growth)
    seed: int = 0
    sweep_mode: str = "permutation_sweep"
    log_every: int = 1

    def __post_init__(self):
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")
        if self.total_batch_steps < 0 or self.log_every < 1:
            raise ValueError("invalid step counts")
        if self.sweep_mode not in SWEEP_MODES:
            raise ValueError(f"sweep_mode must be one of {SWEEP_MODES}")


@dataclass
class LogRecord:
    step: int
    train_loss: float
    val_loss: float
    wall_ms: float


@dataclass
class TrainLog:
    method: str
    initial_train_loss: float
    initial_val_loss: float
    records: list = field(default_factory=list)
    params: NetworkParams | None = None

    def append(self, rec):
        if self.records and rec.step <= self.records[-1].step:
            raise ValueError("batch steps must be strictly increasing")
        self.records.append(rec)

    @property
    def final_train_loss(self):
        return self.records[-1].train_loss if self.records else self.initial_train_loss

    @property
    def final_val_loss(self):
        return self.records[-1].val_loss if self.records else self.initial_val_loss

    def train_curve(self):
        """(step, train_loss) pairs including step 0 (the initial point)."""
        return [(0, self.initial_train_loss)] + [(r.step, r.train_loss) for r in self.records]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "train_loss", "val_loss", "wall_ms"])
            for r in self.records:
                w.writerow([r.step, f"{r.train_loss:.17g}", f"{r.val_loss:.17g}", f"{r.wall_ms:.17g}"])


def init_params(shape, seed):
    """Uniform init with per-layer variance 2/fan_in (support +-sqrt(3*var))."""
    rng = np.random.default_rng([seed, 0])
    s1 = math.sqrt(3.0 * 2.0 / shape.d_in)
    s2 = math.sqrt(3.0 * 2.0 / shape.d_hidden)
    h, i, o = shape.d_hidden, shape.d_in, shape.d_out
    w1 = rng.uniform(-s1, s1, size=(h, i))
    b1 = rng.uniform(-s1, s1, size=h)
    w2 = rng.uniform(-s2, s2, size=(o, h))
    b2 = rng.uniform(-s2, s2, size=o)
    return NetworkParams(w1, b1, w2, b2)


def minibatch_indices(S, S_prime, t, seed):
    """Mini-batches of batch step ``t``: a fresh seeded permutation of
    ``range(S)`` cut into ceil(S/S') chunks, the last possibly short."""
    if not 1 <= S_prime <= S:
        raise ValueError(f"mini-batch size {S_prime} outside [1, {S}]")
    perm = np.random.default_rng([seed, 2, t]).permutation(S)
    return [perm[i : i + S_prime] for i in range(0, S, S_prime)]


def _forward_state(params, X, activation):
    pre = hidden_pre(params, X)
    act = activation(pre)
    out = act @ params.w2.T + params.b2
    return pre, act, out


def h_function(params, X, Y, p, activation, state=None, idx=None):
    """Sum over the batch of the per-sample messages for parameter ``p``.

    Fast path: builds the merged piecewise quadratic directly from cached
    pre-activations and outputs.  ``state`` is ``(pre, act, out)`` over ``X``;
    ``idx`` selects the mini-batch rows.
    """
    if state is None:
        state = _forward_state(params, X, activation)
    pre, act, out = state
    if idx is not None:
        X, Y = X[idx], Y[idx]
    theta = params.get(p)

    if p.kind in ("B2", "W2"):
        d = p.row
        rows = slice(None) if idx is None else idx
        out_b = out[rows]
        resid = Y - out_b
        others = float(np.sum(resid * resid) - np.sum(resid[:, d] ** 2))
        if p.kind == "B2":
            a = np.ones(X.shape[0])
        else:
            a = act[rows, p.col]
        e = resid[:, d] + theta * a
        row = [float(np.dot(e, e)) + others, -2.0 * float(np.dot(a, e)), float(np.dot(a, a))]
        return PwpFunction(np.empty(0), [row])

    j = p.row
    if idx is None:
        pre_j, act_j, out_b = pre[:, j], act[:, j], out
    else:
        pre_j, act_j, out_b = pre[idx, j], act[idx, j], out[idx]
    w2col = np.ascontiguousarray(params.w2[:, j])
    alpha = np.ascontiguousarray(X[:, p.col]) if p.kind == "W1" else np.ones(X.shape[0])
    beta = np.ascontiguousarray(pre_j - theta * alpha)
    resid = np.ascontiguousarray(Y - out_b + act_j[:, None] * w2col[None, :])
    kinks, slopes, icpts = activation.arrays()
    left, bps, deltas = kernels.hidden_unit_records(
        alpha, beta, resid, w2col, kinks, slopes, icpts, worker_count()
    )
    mesh, coeffs = _merge_sorted(left.sum(axis=0), bps, deltas)
    return PwpFunction(mesh, coeffs)


def h_function_reference(params, X, Y, p, activation):
    """Same function as `h_function`, built one `build_message` at a time."""
    msgs = [build_message(params, Sample(x, y), p, activation) for x, y in zip(X, Y)]
    msgs = [m.with_degree(2) for m in msgs]
    return sum_pwp(msgs)


def mpd_step(params, X, Y, p, activation=None, state=None, idx=None):
    """Coordinate update for ``p``: returns ``(new_theta, h)``.

    ``params`` is not modified.  The current value of ``p`` is the tie-break
    hint, so a parameter already at its coordinate minimum does not move.
    """
    activation = activation or leaky_hard_tanh()
    p.validate(_shape_of(params, activation))
    h = h_function(params, X, Y, p, activation, state=state, idx=idx)
    res = global_min(h, hint=params.get(p))
    return res.argmin, h


def _shape_of(params, activation):
    d_in, d_hidden, d_out = params.shape
    return NetworkShape(d_in, d_hidden, d_out, activation)


class _Cache:
    """Pre-activations, activations and outputs over the training set, kept
    in sync with single-parameter writes."""

    def __init__(self, params, X, activation):
        self.X = X
        self.activation = activation
        self.refresh(params)

    def refresh(self, params):
        self.pre, self.act, self.out = _forward_state(params, self.X, self.activation)

    @property
    def state(self):
        return self.pre, self.act, self.out

    def update(self, params, p, old, new):
        delta = new - old
        if delta == 0.0:
            return
        if p.kind == "B2":
            self.out[:, p.row] += delta
        elif p.kind == "W2":
            self.out[:, p.row] += delta * self.act[:, p.col]
        else:
            j = p.row
            step = self.X[:, p.col] * delta if p.kind == "W1" else delta
            self.pre[:, j] += step
            new_act = self.activation(self.pre[:, j])
            self.out += np.outer(new_act - self.act[:, j], params.w2[:, j])
            self.act[:, j] = new_act


class _ParamPicker:
    def __init__(self, n_params, mode, seed):
        self.n = n_params
        self.mode = mode
        self.rng = np.random.default_rng([seed, 1])
        self._queue = []

    def next(self):
        if self.mode == "random_with_replacement":
            return int(self.rng.integers(self.n))
        if not self._queue:
            self._queue = list(self.rng.permutation(self.n)[::-1])
        return int(self._queue.pop())


def _eval_losses(params, Xt, Yt, Xv, Yv, activation):
    tl = loss(params, (Xt, Yt), activation)
    vl = loss(params, (Xv, Yv), activation) if Xv.shape[0] else float("nan")
    return tl, vl


def train(shape, dataset, config, split=None, params=None):
    """Run ``config.total_batch_steps`` batch steps of mini-batch MPD.

    Each batch step walks the mini-batches of `minibatch_indices`; each
    mini-batch updates one parameter.  Train and validation losses are logged
    once per batch step (every ``log_every``).
    """
    activation = shape.activation
    if split is None:
        split = split_80_20(dataset.n_samples, config.seed)
    Xt, Yt = dataset.X[split.train_indices], dataset.Y[split.train_indices]
    Xv, Yv = dataset.X[split.val_indices], dataset.Y[split.val_indices]
    params = init_params(shape, config.seed) if params is None else params.copy()
    params.check(shape)

    S = Xt.shape[0]
    tl0, vl0 = _eval_losses(params, Xt, Yt, Xv, Yv, activation)
    log = TrainLog("mpd", tl0, vl0)
    picker = _ParamPicker(param_count(shape), config.sweep_mode, config.seed)
    cache = _Cache(params, Xt, activation)
    start = time.perf_counter()

    for t in range(config.total_batch_steps):
        size = (
            config.minibatch_growth.size_at(config.minibatch_size, t, S)
            if config.minibatch_growth
            else min(config.minibatch_size, S)
        )
        cache.refresh(params)
        for idx in minibatch_indices(S, size, t, config.seed):
            p = ParamRef.from_flat(shape, picker.next())
            full = idx.shape[0] == S
            # full batch: cached rows are already in sample order, no gather
            new, _ = mpd_step(
                params, Xt, Yt, p, activation, state=cache.state, idx=None if full else idx
            )
            old = params.get(p)
            params.set(p, new)
            cache.update(params, p, old, new)
        step = t + 1
        if step % config.log_every == 0 or step == config.total_batch_steps:
            tl, vl = _eval_losses(params, Xt, Yt, Xv, Yv, activation)
            log.append(LogRecord(step, tl, vl, 1000.0 * (time.perf_counter() - start)))

    log.params = params
    return log
