"""Compare compiled and numpy kernels on single MPD steps.

    python3 benchmarks/bench_backends.py [--hidden 64] [--repeat 20]

Prints the median wall time of one hidden-layer ``mpd_step`` per backend and
mini-batch size, plus the speedup of the compiled kernels.
"""

import argparse
import statistics
import time

import numpy as np

from mpdfit import _fallback, mpd, pwp
from mpdfit.data import synthetic_rugged
from mpdfit.mpd import _forward_state, init_params, mpd_step
from mpdfit.network import NetworkShape, ParamRef

try:
    from mpdfit import _kernels
except ImportError:
    _kernels = None


def use(module):
    pwp.kernels = module
    mpd.kernels = module


def time_step(params, X, Y, p, state, idx, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        mpd_step(params, X, Y, p, state=state, idx=idx)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--sizes", default="512,1024,2048,4096")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    ds = synthetic_rugged("terrain", max(sizes), seed=0)
    shape = NetworkShape(ds.d_in, args.hidden, ds.d_out)
    params = init_params(shape, 0)
    p = ParamRef("W1", 0, 0)
    # training keeps the forward state cached, so time only the step itself
    state = _forward_state(params, ds.X, shape.activation)
    backends = [("numpy", _fallback)] + ([("compiled", _kernels)] if _kernels else [])

    print(f"{'S_prime':>8} " + " ".join(f"{n + ' ms':>12}" for n, _ in backends) + "  speedup")
    for n in sizes:
        idx = np.random.default_rng(n).permutation(ds.n_samples)[:n]
        row = []
        for _, module in backends:
            use(module)
            row.append(1000 * time_step(params, ds.X, ds.Y, p, state, idx, args.repeat))
        speed = f"{row[0] / row[1]:8.2f}x" if len(row) == 2 else ""
        print(f"{n:>8} " + " ".join(f"{t:12.3f}" for t in row) + speed)


if __name__ == "__main__":
    main()
