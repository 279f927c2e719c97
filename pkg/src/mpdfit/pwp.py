"""Exact algebra over piecewise polynomials of one real variable.

A `PwpFunction` stores the finite interior breakpoints and one coefficient
row per subdomain.  The first and last rows extend to -inf/+inf.  Subdomains
are half-open on the right, so a breakpoint belongs to the piece on its
right.

Operations are pure and return new objects:

    f = affine_of(2.0, 0.0)                 # 2*theta
    g = compose_activation(leaky_hard_tanh(), f)
    h = sum_pwp([square_residual(0.3, g), square_residual(-1.0, g)])
    res = global_min(h, hint=0.0)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels

EPS_MESH = 1e-12
EPS_TIE = 1e-10
# a tail coefficient within this fraction of its column maximum counts as zero
EPS_FLAT = 1e-13


class UnboundedBelow(ArithmeticError):
    """A tail of the function decreases without bound."""


def _as_row_array(coeffs):
    arr = np.array(coeffs, dtype=np.float64, ndmin=2)
    if arr.ndim != 2:
        raise ValueError("coeffs must be a list of coefficient rows")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True, eq=False)
class PwpFunction:
    """Piecewise polynomial with implicit infinite end pieces.

    Parameters
    ----------
    mesh : array_like, shape (R-1,)
        Strictly increasing finite breakpoints.
    coeffs : array_like, shape (R, Q+1)
        Row ``r`` holds ``c0, c1, ..., cQ`` of the polynomial on subdomain r.
    """

    mesh: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        mesh = np.ascontiguousarray(np.asarray(self.mesh, dtype=np.float64).reshape(-1))
        coeffs = _as_row_array(self.coeffs)
        if coeffs.shape[0] != mesh.shape[0] + 1:
            raise ValueError(
                f"need len(mesh)+1 coefficient rows, got {coeffs.shape[0]} "
                f"rows for {mesh.shape[0]} breakpoints"
            )
        if coeffs.shape[1] < 1:
            raise ValueError("coefficient rows must be non-empty")
        if not (np.all(np.isfinite(mesh)) and np.all(np.isfinite(coeffs))):
            raise ValueError("mesh and coefficients must be finite")
        if mesh.shape[0] > 1:
            gaps = np.diff(mesh)
            if np.any(gaps <= EPS_MESH * np.maximum(1.0, np.abs(mesh[1:]))):
                raise ValueError("mesh must be strictly increasing with gaps above eps_mesh")
        mesh.flags.writeable = False
        coeffs.flags.writeable = False
        object.__setattr__(self, "mesh", mesh)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self):
        return self.coeffs.shape[1] - 1

    @property
    def n_pieces(self):
        return self.coeffs.shape[0]

    def __call__(self, x):
        return evaluate(self, x)

    def with_degree(self, q):
        """Same function with rows zero-padded to degree ``q``."""
        if q < self.degree:
            raise ValueError("cannot lower the degree")
        if q == self.degree:
            return self
        pad = np.zeros((self.n_pieces, q - self.degree))
        return PwpFunction(self.mesh, np.hstack([self.coeffs, pad]))

    def __repr__(self):
        return f"PwpFunction(Q={self.degree}, R={self.n_pieces}, mesh={self.mesh.tolist()})"


@dataclass(frozen=True)
class PwlActivation:
    """Continuous piecewise-linear activation.

    ``values`` are the ordinates at the kinks; piece 0 is anchored at the
    first kink, piece k >= 1 at kink k-1.
    """

    kinks: tuple
    slopes: tuple
    values: tuple

    def __post_init__(self):
        kinks = tuple(float(k) for k in self.kinks)
        slopes = tuple(float(s) for s in self.slopes)
        values = tuple(float(v) for v in self.values)
        if len(slopes) != len(kinks) + 1 or len(values) != len(kinks):
            raise ValueError("need len(kinks)+1 slopes and len(kinks) values")
        if any(b <= a for a, b in zip(kinks, kinks[1:])):
            raise ValueError("kinks must be strictly increasing")
        for k in range(1, len(kinks)):
            expect = values[k - 1] + slopes[k] * (kinks[k] - kinks[k - 1])
            if abs(expect - values[k]) > 1e-12 * max(1.0, abs(values[k])):
                raise ValueError(f"activation is discontinuous at kink {kinks[k]}")
        object.__setattr__(self, "kinks", kinks)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "values", values)

    @property
    def intercepts(self):
        """Per-piece ``e`` such that the piece is ``slope*a + e``."""
        k, s, v = self.kinks, self.slopes, self.values
        if not k:
            return (0.0,)
        out = [v[0] - s[0] * k[0]]
        out += [v[i - 1] - s[i] * k[i - 1] for i in range(1, len(s))]
        return tuple(out)

    def arrays(self):
        return (
            np.array(self.kinks, dtype=np.float64),
            np.array(self.slopes, dtype=np.float64),
            np.array(self.intercepts, dtype=np.float64),
        )

    def segment(self, a):
        return np.searchsorted(np.array(self.kinks), a, side="right")

    def __call__(self, a):
        kinks, slopes, icpts = self.arrays()
        seg = np.searchsorted(kinks, a, side="right")
        return slopes[seg] * a + icpts[seg]

    def derivative(self, a):
        """Slope of the piece containing ``a``; kinks take the right piece."""
        kinks, slopes, _ = self.arrays()
        return slopes[np.searchsorted(kinks, a, side="right")]

    def as_pwp(self):
        kinks, slopes, icpts = self.arrays()
        return PwpFunction(kinks, np.column_stack([icpts, slopes]))


def leaky_hard_tanh(alpha=0.01):
    """Identity on [-1, 1], slope ``alpha`` outside, continuous."""
    return PwlActivation(kinks=(-1.0, 1.0), slopes=(alpha, 1.0, alpha), values=(-1.0, 1.0))


@dataclass(frozen=True)
class MinResult:
    argmin: float
    min_value: float
    subdomain_index: int


def _check_finite(*vals):
    for v in vals:
        if not math.isfinite(v):
            raise ValueError(f"non-finite input {v!r}")


def evaluate(f, x):
    """Value of ``f`` at ``x`` (scalar or array); breakpoints take the right piece."""
    xa = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(xa)):
        raise ValueError("evaluation point must be finite")
    out = kernels.evaluate_rows(f.mesh, f.coeffs, xa)
    if np.ndim(x) == 0:
        return float(np.reshape(out, -1)[0])
    return out


def constant(c):
    _check_finite(c)
    return PwpFunction(np.empty(0), [[float(c)]])


def affine_of(a, b):
    """Single-piece ``b + a*theta`` (degree 1)."""
    _check_finite(a, b)
    return PwpFunction(np.empty(0), [[float(b), float(a)]])


def scale_add(f, a, b):
    """``a*f + b`` on the same mesh."""
    _check_finite(a, b)
    coeffs = f.coeffs * a
    coeffs[:, 0] += b
    return PwpFunction(f.mesh, coeffs)


def _merge_sorted(left, bps, deltas):
    bps = np.ascontiguousarray(bps, dtype=np.float64)
    deltas = np.ascontiguousarray(deltas, dtype=np.float64)
    # distinct breakpoints already fix the order; exact ties are broken by the
    # delta values so the result never depends on input order
    order = np.argsort(bps)
    sb = bps[order]
    if np.any(sb[1:] == sb[:-1]):
        keys = tuple(deltas[:, q] for q in range(deltas.shape[1] - 1, -1, -1)) + (bps,)
        order = np.lexsort(keys)
    mesh, coeffs = kernels.merge_records(
        left, np.ascontiguousarray(bps[order]), np.ascontiguousarray(deltas[order]), EPS_MESH
    )
    return mesh, coeffs


def sum_pwp(fs):
    """Exact pointwise sum of piecewise polynomials of equal degree.

    Each addend contributes one (breakpoint, row difference) record per
    breakpoint.  Records are sorted by breakpoint and prefix-summed starting
    from the sum of all leftmost rows.  The result does not depend on the
    order of ``fs``.
    """
    fs = list(fs)
    if not fs:
        raise ValueError("sum_pwp needs at least one function")
    q = fs[0].degree
    if any(f.degree != q for f in fs):
        raise ValueError("all addends must share the same degree")
    left = np.array([math.fsum(f.coeffs[0, j] for f in fs) for j in range(q + 1)])
    bps = np.concatenate([f.mesh for f in fs])
    deltas = np.concatenate([np.diff(f.coeffs, axis=0) for f in fs], axis=0).reshape(-1, q + 1)
    mesh, coeffs = _merge_sorted(left, bps, deltas)
    return PwpFunction(mesh, coeffs)


def compose_activation(act, inner):
    """``act(inner(theta))`` for a piecewise-linear ``inner``.

    Every piece of ``inner`` is cut where it crosses a kink of ``act``.  Roots
    within eps_mesh of an existing breakpoint are dropped, so no zero-width
    piece is created.
    """
    if inner.degree != 1:
        raise ValueError("compose_activation needs a piecewise-linear inner function")
    kinks, slopes, icpts = act.arrays()
    mesh = inner.mesh
    R = inner.n_pieces
    lo = np.concatenate(([-np.inf], mesh))
    hi = np.concatenate((mesh, [np.inf]))

    new_bps = [mesh]
    for r in range(R):
        b, a = inner.coeffs[r]
        if a == 0.0:
            continue
        roots = (kinks - b) / a
        tol = EPS_MESH * np.maximum(1.0, np.abs(roots))
        keep = np.isfinite(roots) & (roots > lo[r] + tol) & (roots < hi[r] - tol)
        new_bps.append(roots[keep])
    all_bps = np.unique(np.concatenate(new_bps))
    if all_bps.shape[0] > 1:
        gaps = np.diff(all_bps)
        tol = EPS_MESH * np.maximum(1.0, np.abs(all_bps[1:]))
        all_bps = all_bps[np.concatenate(([True], gaps > tol))]

    # one probe point strictly inside each new piece
    if all_bps.shape[0] == 0:
        probes = np.array([0.0])
    else:
        mids = 0.5 * (all_bps[:-1] + all_bps[1:])
        probes = np.concatenate(([all_bps[0] - 1.0], mids, [all_bps[-1] + 1.0]))
    inner_idx = np.searchsorted(mesh, probes, side="right")
    b = inner.coeffs[inner_idx, 0]
    a = inner.coeffs[inner_idx, 1]
    seg = np.searchsorted(kinks, a * probes + b, side="right")
    m = slopes[seg]
    coeffs = np.column_stack([m * b + icpts[seg], m * a])
    return PwpFunction(all_bps, coeffs)


def square_residual(y, f):
    """``(y - f(theta))**2`` for piecewise-linear ``f`` (degree 2 result)."""
    _check_finite(y)
    if f.degree != 1:
        raise ValueError("square_residual needs a piecewise-linear function")
    b = f.coeffs[:, 0]
    a = f.coeffs[:, 1]
    r = y - b
    return PwpFunction(f.mesh, np.column_stack([r * r, -2.0 * a * r, a * a]))


def global_min(f, hint=0.0):
    """Global minimum of a piecewise polynomial of degree <= 2.

    Candidates are the breakpoints, interior vertices of convex pieces and
    ``hint`` itself.  Among candidates within the tie tolerance of the best
    value, the one closest to ``hint`` wins, then the smallest.  A constant
    function therefore returns ``hint``.

    Raises
    ------
    UnboundedBelow
        If either infinite tail decreases without bound.
    """
    if f.degree > 2:
        raise ValueError("global_min supports degree <= 2")
    _check_finite(hint)
    status, x, v, idx = kernels.minimize_rows(f.mesh, f.coeffs, float(hint), EPS_TIE, EPS_FLAT)
    if status:
        raise UnboundedBelow("piecewise polynomial is unbounded below")
    return MinResult(argmin=x, min_value=v, subdomain_index=idx)


def to_text(f):
    """Round-trip text form: ``Q R``, the breakpoints, then the rows."""
    lines = [f"{f.degree} {f.n_pieces}"]
    lines.append(" ".join(f"{v:.17g}" for v in f.mesh))
    lines.extend(" ".join(f"{v:.17g}" for v in row) for row in f.coeffs)
    return "\n".join(lines) + "\n"


def from_text(text):
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("missing header")
    q, r = int(tokens[0]), int(tokens[1])
    vals = [float(t) for t in tokens[2:]]
    need = (r - 1) + r * (q + 1)
    if len(vals) != need:
        raise ValueError(f"expected {need} numbers after header, got {len(vals)}")
    mesh = np.array(vals[: r - 1])
    coeffs = np.array(vals[r - 1 :]).reshape(r, q + 1)
    return PwpFunction(mesh, coeffs)
