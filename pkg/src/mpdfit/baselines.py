"""Adam and Nesterov-accelerated gradient trainers for the same network."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .mpd import LogRecord, TrainLog, init_params, minibatch_indices
from .network import NetworkParams, gradient, loss


@dataclass(frozen=True)
class GdConfig:
    learning_rate: float = 1e-3
    minibatch_size: int = 256
    betas: tuple = (0.9, 0.999)
    epsilon: float = 1e-8
    momentum: float = 0.9
    total_batch_steps: int = 50
    seed: int = 0
    log_every: int = 1

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        b1, b2 = self.betas
        if not (0 <= b1 < 1 and 0 <= b2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.minibatch_size < 1 or self.total_batch_steps < 0 or self.log_every < 1:
            raise ValueError("invalid sizes")


@dataclass
class AdamState:
    theta: np.ndarray
    m: np.ndarray = None
    v: np.ndarray = None
    t: int = 0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.m is None:
            self.m = np.zeros_like(self.theta)
        if self.v is None:
            self.v = np.zeros_like(self.theta)


def adam_step(state, grad, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns a new state."""
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    theta = state.theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    return AdamState(theta, m, v, t)


def nag_step(velocity, theta, lr, momentum, grad_at_lookahead):
    """Nesterov update given the gradient at ``theta + momentum*velocity``.

    Returns ``(theta, velocity)``.
    """
    velocity = momentum * velocity - lr * grad_at_lookahead
    return theta + velocity, velocity


def train_gd(shape, dataset, config, method, split=None, params=None):
    """Mini-batch Adam or NAG with the same init and logging as MPD."""
    from .data import split_80_20

    if method not in ("adam", "nag"):
        raise ValueError(f"unknown method {method!r}")
    act = shape.activation
    if split is None:
        split = split_80_20(dataset.n_samples, config.seed)
    Xt, Yt = dataset.X[split.train_indices], dataset.Y[split.train_indices]
    Xv, Yv = dataset.X[split.val_indices], dataset.Y[split.val_indices]
    params = init_params(shape, config.seed) if params is None else params.copy()
    params.check(shape)

    def losses(p):
        tl = loss(p, (Xt, Yt), act)
        vl = loss(p, (Xv, Yv), act) if Xv.shape[0] else float("nan")
        return tl, vl

    S = Xt.shape[0]
    size = min(config.minibatch_size, S)
    log = TrainLog(method, *losses(params))
    theta = params.flat()
    adam = AdamState(theta)
    velocity = np.zeros_like(theta)
    start = time.perf_counter()

    for t in range(config.total_batch_steps):
        for idx in minibatch_indices(S, size, t, config.seed):
            batch = (Xt[idx], Yt[idx])
            if method == "adam":
                g = gradient(NetworkParams.from_flat(shape, adam.theta), batch, act)
                adam = adam_step(adam, g, config.learning_rate, *config.betas, config.epsilon)
            else:
                ahead = theta + config.momentum * velocity
                g = gradient(NetworkParams.from_flat(shape, ahead), batch, act)
                theta, velocity = nag_step(velocity, theta, config.learning_rate, config.momentum, g)
        if method == "adam":
            theta = adam.theta
        step = t + 1
        if step % config.log_every == 0 or step == config.total_batch_steps:
            tl, vl = losses(NetworkParams.from_flat(shape, theta))
            log.append(LogRecord(step, tl, vl, 1000.0 * (time.perf_counter() - start)))

    log.params = NetworkParams.from_flat(shape, theta)
    return log
