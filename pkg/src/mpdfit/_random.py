"""Random piecewise polynomials and networks for property checks."""

import numpy as np

from .network import NetworkParams
from .pwp import PwpFunction


def random_mesh(rng, n_breaks, lo=-5.0, hi=5.0):
    while True:
        mesh = np.sort(rng.uniform(lo, hi, n_breaks))
        if n_breaks < 2 or np.min(np.diff(mesh)) > 1e-6:
            return mesh


def random_pwp(rng, degree, n_pieces, lo=-5.0, hi=5.0):
    """Arbitrary (possibly discontinuous) piecewise polynomial."""
    mesh = random_mesh(rng, n_pieces - 1, lo, hi)
    return PwpFunction(mesh, rng.normal(size=(n_pieces, degree + 1)))


def random_pwl_continuous(rng, n_pieces, lo=-5.0, hi=5.0):
    mesh = random_mesh(rng, n_pieces - 1, lo, hi)
    slopes = rng.normal(size=n_pieces)
    coeffs = np.empty((n_pieces, 2))
    coeffs[0] = [rng.normal(), slopes[0]]
    for r in range(1, n_pieces):
        t = mesh[r - 1]
        v = coeffs[r - 1, 0] + coeffs[r - 1, 1] * t
        coeffs[r] = [v - slopes[r] * t, slopes[r]]
    return PwpFunction(mesh, coeffs)


def random_bounded_pq(rng, n_pieces, lo=-5.0, hi=5.0, curv=(0.1, 1.0)):
    """Continuous piecewise quadratic with convex tails (bounded below).

    Interior pieces may be concave; curvatures are drawn with magnitude in
    ``curv``.  The tail vertices are placed within [lo-1, hi+1], so the
    global minimizer always lies in that box.
    """
    mesh = random_mesh(rng, n_pieces - 1, lo, hi)
    coeffs = np.empty((n_pieces, 3))
    c2 = rng.uniform(*curv, size=n_pieces) * rng.choice([-1.0, 1.0], size=n_pieces)
    c2[0] = abs(c2[0])
    c2[-1] = abs(c2[-1])
    c1 = rng.normal(scale=2.0, size=n_pieces)
    first = mesh[0] if mesh.size else hi + 1.0
    last = mesh[-1] if mesh.size else lo - 1.0
    c1[0] = -2.0 * c2[0] * rng.uniform(lo - 1.0, first)
    c1[-1] = -2.0 * c2[-1] * rng.uniform(last, hi + 1.0)
    coeffs[0] = [rng.normal(), c1[0], c2[0]]
    for r in range(1, n_pieces):
        t = mesh[r - 1]
        prev = coeffs[r - 1]
        v = prev[0] + prev[1] * t + prev[2] * t * t
        coeffs[r] = [v - c1[r] * t - c2[r] * t * t, c1[r], c2[r]]
    return PwpFunction(mesh, coeffs)


def random_params(rng, shape, scale=1.0):
    h, i, o = shape.d_hidden, shape.d_in, shape.d_out
    return NetworkParams(
        rng.normal(scale=scale, size=(h, i)),
        rng.normal(scale=scale, size=h),
        rng.normal(scale=scale, size=(o, h)),
        rng.normal(scale=scale, size=o),
    )
