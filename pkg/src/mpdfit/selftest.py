"""Small-scale property checks runnable from the command line.

Each check raises ``AssertionError`` on failure.  Setting
``MPDFIT_SELFTEST_MUTATION=sum_pwp`` swaps in a deliberately broken merge so
the failure path can be exercised.
"""

from __future__ import annotations

import os
import time
import traceback

import numpy as np

from . import pwp
from ._random import random_bounded_pq, random_params, random_pwl_continuous, random_pwp
from .baselines import AdamState, adam_step
from .data import split_80_20, standardize, synthetic_rugged
from .mpd import TrainConfig, h_function, init_params, minibatch_indices, train
from .network import (
    NetworkShape,
    ParamRef,
    Sample,
    build_message,
    forward,
    gradient,
    loss,
    output_trace,
)


def _broken_sum(fs):
    h = pwp.sum_pwp(fs)
    if h.n_pieces < 2:
        return pwp.PwpFunction(h.mesh, h.coeffs * 1.001)
    coeffs = h.coeffs.copy()
    coeffs[-1] = coeffs[-2]  # forget the last delta
    return pwp.PwpFunction(h.mesh, coeffs)


def _sum_pwp():
    if os.environ.get("MPDFIT_SELFTEST_MUTATION") == "sum_pwp":
        return _broken_sum
    return pwp.sum_pwp


def check_sum_pointwise():
    rng = np.random.default_rng(11)
    fs = [random_pwp(rng, 2, int(rng.integers(1, 8))) for _ in range(20)]
    h = _sum_pwp()(fs)
    x = rng.uniform(-7, 7, 500)
    ref = np.sum([f(x) for f in fs], axis=0)
    scale = np.sum([np.abs(f(x)) for f in fs], axis=0) + 1.0
    assert np.all(np.abs(h(x) - ref) <= 1e-9 * scale), "merged sum disagrees with pointwise sum"


def check_sum_permutation():
    rng = np.random.default_rng(12)
    fs = [random_pwp(rng, 2, int(rng.integers(1, 6))) for _ in range(15)]
    a = _sum_pwp()(fs)
    b = _sum_pwp()([fs[i] for i in rng.permutation(len(fs))])
    assert np.array_equal(a.mesh, b.mesh) and np.array_equal(a.coeffs, b.coeffs)


def check_compose_continuity():
    rng = np.random.default_rng(13)
    act = pwp.leaky_hard_tanh()
    for _ in range(20):
        g = pwp.compose_activation(act, random_pwl_continuous(rng, 4))
        for r, t in enumerate(g.mesh):
            lv = g.coeffs[r, 0] + g.coeffs[r, 1] * t
            rv = g.coeffs[r + 1, 0] + g.coeffs[r + 1, 1] * t
            assert abs(lv - rv) <= 1e-9 * max(1.0, abs(lv)), "composition is discontinuous"


def check_global_min_grid():
    rng = np.random.default_rng(14)
    for _ in range(20):
        f = random_bounded_pq(rng, int(rng.integers(1, 20)))
        res = pwp.global_min(f, 0.0)
        grid = np.linspace(-8, 8, 20001)
        assert np.min(f(grid)) >= res.min_value - 1e-8, "grid found a lower value"


def check_text_roundtrip():
    rng = np.random.default_rng(15)
    f = random_pwp(rng, 2, 6)
    g = pwp.from_text(pwp.to_text(f))
    assert np.array_equal(f.mesh, g.mesh) and np.array_equal(f.coeffs, g.coeffs)


def check_trace_oracle():
    rng = np.random.default_rng(21)
    shape = NetworkShape(3, 4, 2)
    for _ in range(30):
        params = random_params(rng, shape)
        x = rng.normal(size=3)
        p = ParamRef.from_flat(shape, int(rng.integers(shape.n_params)))
        t = float(rng.normal(scale=2.0))
        traces = output_trace(params, x, p)
        want = forward(params.with_value(p, t), x)
        got = np.array([tr(t) for tr in traces])
        assert np.allclose(got, want, rtol=1e-10, atol=1e-10), "trace disagrees with forward pass"


def check_message_oracle():
    rng = np.random.default_rng(22)
    shape = NetworkShape(2, 3, 2)
    for _ in range(30):
        params = random_params(rng, shape)
        s = Sample(rng.normal(size=2), rng.normal(size=2))
        p = ParamRef.from_flat(shape, int(rng.integers(shape.n_params)))
        t = float(rng.normal(scale=2.0))
        got = build_message(params, s, p)(t)
        want = loss(params.with_value(p, t), [s])
        assert abs(got - want) <= 1e-10 * max(1.0, abs(want)), "message disagrees with loss"


def check_gradient_fd():
    rng = np.random.default_rng(23)
    shape = NetworkShape(2, 4, 1)
    params = random_params(rng, shape, 0.3)
    X, Y = rng.normal(size=(10, 2)), rng.normal(size=(10, 1))
    g = gradient(params, (X, Y))
    theta = params.flat()
    h = 1e-6
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        up = loss(type(params).from_flat(shape, theta + e), (X, Y))
        dn = loss(type(params).from_flat(shape, theta - e), (X, Y))
        fd = (up - dn) / (2 * h)
        assert abs(fd - g[i]) <= 1e-5 * max(1.0, abs(fd)), "gradient disagrees with finite differences"


def check_h_fast_vs_reference():
    rng = np.random.default_rng(31)
    shape = NetworkShape(2, 3, 1)
    params = random_params(rng, shape)
    X, Y = rng.normal(size=(12, 2)), rng.normal(size=(12, 1))
    act = shape.activation
    for i in range(shape.n_params):
        p = ParamRef.from_flat(shape, i)
        fast = h_function(params, X, Y, p, act)
        msgs = [build_message(params, Sample(x, y), p).with_degree(2) for x, y in zip(X, Y)]
        ref = _sum_pwp()(msgs)
        t = rng.uniform(-6, 6, 200)
        assert np.allclose(fast(t), ref(t), rtol=1e-9, atol=1e-9), f"h mismatch for {p}"


def check_full_batch_monotone():
    ds = synthetic_rugged("terrain", 128, 2, seed=1)
    cfg = TrainConfig(total_batch_steps=60, minibatch_size=10**9, minibatch_growth=None, seed=1)
    log = train(NetworkShape(2, 6, 1), ds, cfg)
    curve = [v for _, v in log.train_curve()]
    assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:])), "full-batch loss increased"


def check_minibatch_cover():
    for S, Sp in [(10, 3), (17, 17), (100, 7)]:
        chunks = minibatch_indices(S, Sp, 4, 9)
        allidx = np.concatenate(chunks)
        assert sorted(allidx.tolist()) == list(range(S))


def check_adam_reference():
    rng = np.random.default_rng(41)
    st = AdamState(rng.normal(size=5))
    m = np.zeros(5)
    v = np.zeros(5)
    th = st.theta.copy()
    for t in range(1, 20):
        g = rng.normal(size=5)
        st = adam_step(st, g, 1e-3)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        th = th - 1e-3 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert np.allclose(st.theta, th, rtol=0, atol=1e-12)


def check_standardize():
    ds = standardize(synthetic_rugged("terrain", 200, 2, seed=3, standardized=False))
    assert np.all(np.abs(ds.X.mean(axis=0)) <= 1e-12)
    assert np.all(np.abs(ds.X.var(axis=0) - 1) <= 1e-9)
    sp = split_80_20(200, 0)
    assert len(sp.train_indices) == 160 and len(sp.val_indices) == 40


def check_init_support():
    shape = NetworkShape(2, 50, 1)
    p = init_params(shape, 0)
    assert np.all(np.abs(p.w1) < np.sqrt(3.0))
    assert np.all(np.abs(p.w2) < np.sqrt(3.0 * 2.0 / 50))


CHECKS = [
    ("pwp.sum_pointwise", check_sum_pointwise),
    ("pwp.sum_permutation", check_sum_permutation),
    ("pwp.compose_continuity", check_compose_continuity),
    ("pwp.global_min_grid", check_global_min_grid),
    ("pwp.text_roundtrip", check_text_roundtrip),
    ("nn.trace_oracle", check_trace_oracle),
    ("nn.message_oracle", check_message_oracle),
    ("nn.gradient_fd", check_gradient_fd),
    ("mpd.h_fast_vs_reference", check_h_fast_vs_reference),
    ("mpd.full_batch_monotone", check_full_batch_monotone),
    ("mpd.minibatch_cover", check_minibatch_cover),
    ("mpd.init_support", check_init_support),
    ("baselines.adam_reference", check_adam_reference),
    ("data.standardize", check_standardize),
]


def run(filter_text=None, out=print):
    """Run the checks whose name contains ``filter_text``; returns failure count."""
    failures = 0
    selected = [(n, f) for n, f in CHECKS if not filter_text or filter_text in n]
    for name, fn in selected:
        t0 = time.perf_counter()
        try:
            fn()
        except Exception as exc:  # report every failing property, keep going
            failures += 1
            out(f"FAIL {name}: {exc}")
            if not isinstance(exc, AssertionError):
                out(traceback.format_exc().rstrip())
        else:
            out(f"ok   {name} ({1000 * (time.perf_counter() - t0):.0f} ms)")
    out(f"{len(selected) - failures}/{len(selected)} checks passed")
    return failures
