"""One-hidden-layer feed-forward network with a piecewise-linear activation.

Besides the usual forward pass, loss and gradient, this module expresses the
network output, and the per-sample squared error, as exact piecewise
functions of a single parameter with every other parameter frozen.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pwp import (
    PwlActivation,
    affine_of,
    compose_activation,
    leaky_hard_tanh,
    scale_add,
    square_residual,
    sum_pwp,
)

KINDS = ("W1", "B1", "W2", "B2")


@dataclass(frozen=True)
class NetworkShape:
    d_in: int
    d_hidden: int
    d_out: int
    activation: PwlActivation = field(default_factory=leaky_hard_tanh)

    def __post_init__(self):
        if min(self.d_in, self.d_hidden, self.d_out) < 1:
            raise ValueError("all layer widths must be >= 1")

    @property
    def n_params(self):
        return param_count(self)

    def block_sizes(self):
        h, i, o = self.d_hidden, self.d_in, self.d_out
        return (("W1", h * i), ("B1", h), ("W2", o * h), ("B2", o))


def param_count(shape):
    return shape.d_hidden * shape.d_in + shape.d_hidden + shape.d_out * shape.d_hidden + shape.d_out


@dataclass(frozen=True)
class ParamRef:
    """One scalar parameter: ``kind`` in W1/B1/W2/B2 plus (row, col)."""

    kind: str
    row: int
    col: int = 0

    def validate(self, shape):
        dims = {
            "W1": (shape.d_hidden, shape.d_in),
            "B1": (shape.d_hidden, 1),
            "W2": (shape.d_out, shape.d_hidden),
            "B2": (shape.d_out, 1),
        }
        if self.kind not in dims:
            raise ValueError(f"unknown parameter kind {self.kind!r}")
        nr, nc = dims[self.kind]
        if not (0 <= self.row < nr and 0 <= self.col < nc):
            raise IndexError(f"{self} out of range for shape {shape}")

    def flat_index(self, shape):
        self.validate(shape)
        h, i, o = shape.d_hidden, shape.d_in, shape.d_out
        if self.kind == "W1":
            return self.row * i + self.col
        if self.kind == "B1":
            return h * i + self.row
        if self.kind == "W2":
            return h * i + h + self.row * h + self.col
        return h * i + h + o * h + self.row

    @classmethod
    def from_flat(cls, shape, index):
        h, i, o = shape.d_hidden, shape.d_in, shape.d_out
        if not 0 <= index < param_count(shape):
            raise IndexError(f"flat index {index} out of range")
        if index < h * i:
            return cls("W1", index // i, index % i)
        index -= h * i
        if index < h:
            return cls("B1", index)
        index -= h
        if index < o * h:
            return cls("W2", index // h, index % h)
        return cls("B2", index - o * h)


@dataclass
class NetworkParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        self.w1 = np.array(self.w1, dtype=np.float64, ndmin=2)
        self.b1 = np.array(self.b1, dtype=np.float64).reshape(-1)
        self.w2 = np.array(self.w2, dtype=np.float64, ndmin=2)
        self.b2 = np.array(self.b2, dtype=np.float64).reshape(-1)
        h, _ = self.w1.shape
        o, h2 = self.w2.shape
        if self.b1.shape != (h,) or h2 != h or self.b2.shape != (o,):
            raise ValueError("inconsistent parameter shapes")
        for arr in (self.w1, self.b1, self.w2, self.b2):
            if not np.all(np.isfinite(arr)):
                raise ValueError("parameters must be finite")

    @property
    def shape(self):
        return self.w1.shape[1], self.w1.shape[0], self.w2.shape[0]

    def check(self, shape):
        if self.shape != (shape.d_in, shape.d_hidden, shape.d_out):
            raise ValueError(f"params {self.shape} do not match {shape}")

    def copy(self):
        return NetworkParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())

    def flat(self):
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    @classmethod
    def from_flat(cls, shape, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (param_count(shape),):
            raise ValueError("flat vector has the wrong length")
        h, i, o = shape.d_hidden, shape.d_in, shape.d_out
        a = h * i
        b = a + h
        c = b + o * h
        return cls(vec[:a].reshape(h, i), vec[a:b], vec[b:c].reshape(o, h), vec[c:])

    @classmethod
    def zeros(cls, shape):
        return cls.from_flat(shape, np.zeros(param_count(shape)))

    def _array(self, kind):
        return {"W1": self.w1, "B1": self.b1, "W2": self.w2, "B2": self.b2}[kind]

    def get(self, p):
        arr = self._array(p.kind)
        return float(arr[p.row, p.col] if arr.ndim == 2 else arr[p.row])

    def set(self, p, value):
        arr = self._array(p.kind)
        if arr.ndim == 2:
            arr[p.row, p.col] = value
        else:
            arr[p.row] = value

    def with_value(self, p, value):
        out = self.copy()
        out.set(p, value)
        return out


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(self.y, dtype=np.float64))
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("sample entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


def stack(samples):
    """List of `Sample` -> (X, Y) arrays."""
    samples = list(samples)
    if not samples:
        raise ValueError("empty sample list")
    X = np.stack([s.x for s in samples])
    Y = np.stack([s.y for s in samples])
    return X, Y


def _as_batch(samples_or_arrays):
    if isinstance(samples_or_arrays, tuple) and len(samples_or_arrays) == 2:
        X, Y = samples_or_arrays
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        if X.shape[0] == 0:
            raise ValueError("empty sample list")
        return X, Y
    return stack(samples_or_arrays)


def hidden_pre(params, X):
    return X @ params.w1.T + params.b1


def forward_batch(params, X, activation=None):
    activation = activation or leaky_hard_tanh()
    return activation(hidden_pre(params, X)) @ params.w2.T + params.b2


def forward(params, x, activation=None):
    """Network output ``w2 f(w1 x + b1) + b2`` for a single input vector."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != params.w1.shape[1]:
        raise ValueError(f"input has width {x.shape[0]}, network expects {params.w1.shape[1]}")
    return forward_batch(params, x[None, :], activation)[0]


def loss(params, samples, activation=None):
    """Mean over samples of the squared output error.

    ``samples`` is a list of `Sample` or an ``(X, Y)`` tuple of arrays.
    """
    X, Y = _as_batch(samples)
    r = Y - forward_batch(params, X, activation)
    return float(np.sum(r * r) / X.shape[0])


def gradient(params, samples, activation=None):
    """Exact gradient of `loss` as a flat vector (W1, B1, W2, B2 order).

    At a kink the activation derivative is the slope of the right piece.
    """
    activation = activation or leaky_hard_tanh()
    X, Y = _as_batch(samples)
    S = X.shape[0]
    pre = hidden_pre(params, X)
    act = activation(pre)
    out = act @ params.w2.T + params.b2
    d_out = (2.0 / S) * (out - Y)                     # (S, o)
    g_w2 = d_out.T @ act
    g_b2 = d_out.sum(axis=0)
    d_pre = (d_out @ params.w2) * activation.derivative(pre)
    g_w1 = d_pre.T @ X
    g_b1 = d_pre.sum(axis=0)
    return np.concatenate([g_w1.ravel(), g_b1, g_w2.ravel(), g_b2])


def output_trace(params, x, p, activation=None):
    """Network outputs as exact PWL functions of parameter ``p``.

    Returns one `PwpFunction` (degree 1) per output component.
    """
    activation = activation or leaky_hard_tanh()
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    p.validate(NetworkShape(x.shape[0], params.b1.shape[0], params.b2.shape[0], activation))
    pre = params.w1 @ x + params.b1
    act = activation(pre)
    out = params.w2 @ act + params.b2
    theta = params.get(p)
    n_out = out.shape[0]

    if p.kind == "B2":
        return [
            affine_of(1.0, out[d] - theta) if d == p.row else affine_of(0.0, out[d])
            for d in range(n_out)
        ]
    if p.kind == "W2":
        j = p.col
        return [
            affine_of(act[j], out[d] - theta * act[j]) if d == p.row else affine_of(0.0, out[d])
            for d in range(n_out)
        ]

    j = p.row
    if p.kind == "W1":
        slope = x[p.col]
        unit = affine_of(slope, pre[j] - theta * slope)
    else:
        unit = affine_of(1.0, pre[j] - theta)
    z = compose_activation(activation, unit)
    # frozen part of each output: everything except hidden unit j
    frozen = out - params.w2[:, j] * act[j]
    return [scale_add(z, params.w2[d, j], frozen[d]) for d in range(n_out)]


def build_message(params, sample, p, activation=None):
    """Per-sample squared error as an exact piecewise quadratic in ``p``."""
    traces = output_trace(params, sample.x, p, activation)
    parts = [square_residual(float(y), t) for y, t in zip(sample.y, traces)]
    return parts[0] if len(parts) == 1 else sum_pwp(parts)
