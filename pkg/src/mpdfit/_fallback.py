"""Pure numpy implementations of the hot kernels.

Selected at import when the compiled ``_kernels`` extension is unavailable
(or when ``MPDFIT_PURE_PYTHON`` is set).  Every function here has a twin in
``_kernels.pyx`` with the same signature and the same arithmetic order, so
the two backends agree to rounding.
"""

import numpy as np

UNBOUNDED = 1


def merge_records(left, bps, deltas, eps_rel):
    """Prefix-sum sorted (breakpoint, delta-row) records into a mesh and rows.

    ``bps`` must already be sorted ascending.  Breakpoints closer than
    ``eps_rel * max(1, |bp|)`` to their predecessor join its group and the
    group's deltas are summed.
    """
    left = np.asarray(left, dtype=np.float64)
    n = bps.shape[0]
    if n == 0:
        return np.empty(0), left[None, :].copy()
    gaps = np.diff(bps)
    tol = eps_rel * np.maximum(1.0, np.abs(bps[1:]))
    starts = np.concatenate(([0], np.nonzero(gaps > tol)[0] + 1))
    mesh = bps[starts].copy()
    group_sums = np.add.reduceat(deltas, starts, axis=0)
    coeffs = np.empty((starts.shape[0] + 1, deltas.shape[1]))
    coeffs[0] = left
    coeffs[1:] = group_sums
    np.cumsum(coeffs, axis=0, out=coeffs)
    return mesh, coeffs


def evaluate_rows(mesh, coeffs, x):
    x = np.asarray(x, dtype=np.float64)
    idx = np.searchsorted(mesh, x, side="right")
    rows = coeffs[idx]
    out = rows[..., -1].copy()
    for q in range(coeffs.shape[1] - 2, -1, -1):
        out = out * x + rows[..., q]
    return out


def _row_value(c0, c1, c2, x):
    return (c2 * x + c1) * x + c0


def minimize_rows(mesh, coeffs, hint, tie_rel, flat_rel):
    """Global minimum of a piecewise polynomial of degree <= 2.

    Returns ``(status, argmin, value, index)``; ``status == UNBOUNDED`` when a
    tail decreases without bound.
    """
    R = coeffs.shape[0]
    ncol = coeffs.shape[1]
    c0 = coeffs[:, 0]
    c1 = coeffs[:, 1] if ncol > 1 else np.zeros(R)
    c2 = coeffs[:, 2] if ncol > 2 else np.zeros(R)

    # rounding in a prefix sum scales with the column, not with the row
    flat1 = flat_rel * np.max(np.abs(c1))
    flat2 = flat_rel * np.max(np.abs(c2))
    # left tail: c1*theta with theta -> -inf decreases when c1 > 0
    if c2[0] < -flat2 or (c2[0] <= flat2 and c1[0] > flat1):
        return UNBOUNDED, 0.0, 0.0, 0
    if c2[-1] < -flat2 or (c2[-1] <= flat2 and c1[-1] < -flat1):
        return UNBOUNDED, 0.0, 0.0, 0

    lo = np.concatenate(([-np.inf], mesh))
    hi = np.concatenate((mesh, [np.inf]))
    convex = c2 > flat2
    safe = np.where(convex, c2, 1.0)
    vert = -c1 / (2.0 * safe)
    inside = convex & (vert >= lo) & (vert < hi)
    vidx = np.nonzero(inside)[0]

    # candidate order: mesh points, interior vertices, hint
    cand_x = np.concatenate((mesh, vert[vidx], [hint]))
    hint_idx = np.searchsorted(mesh, hint, side="right")
    cand_i = np.concatenate((np.arange(1, R), vidx, [hint_idx]))
    cand_v = _row_value(c0[cand_i], c1[cand_i], c2[cand_i], cand_x)

    best = np.min(cand_v)
    band = best + tie_rel * max(1.0, abs(best))
    ok = np.nonzero(cand_v <= band)[0]
    dist = np.abs(cand_x[ok] - hint)
    # lexicographic: closest to hint, then smallest theta
    order = np.lexsort((cand_x[ok], dist))
    k = ok[order[0]]
    return 0, float(cand_x[k]), float(cand_v[k]), int(cand_i[k])


def hidden_unit_rows(alpha, beta, resid, w2col, slopes, icpts):
    """Quadratic rows of every sample's message on every activation segment.

    The hidden unit's pre-activation is ``alpha*theta + beta``; on segment k
    the activation is ``slopes[k]*a + icpts[k]``; ``resid`` holds the output
    residual with this unit's contribution removed.  Returns shape (n, K+1, 3).
    """
    m = slopes[None, :]
    z_slope = m * alpha[:, None]                      # (n, K+1)
    z_icpt = m * beta[:, None] + icpts[None, :]       # (n, K+1)
    w2sq = float(np.dot(w2col, w2col))
    # B_d = resid_d - w2_d * z_icpt;  A_d = w2_d * z_slope
    wr = resid @ w2col                                # (n,)
    rr = np.einsum("nd,nd->n", resid, resid)          # (n,)
    rows = np.empty(z_slope.shape + (3,))
    rows[..., 0] = rr[:, None] - 2.0 * z_icpt * wr[:, None] + w2sq * z_icpt * z_icpt
    rows[..., 1] = -2.0 * z_slope * (wr[:, None] - w2sq * z_icpt)
    rows[..., 2] = w2sq * z_slope * z_slope
    return rows


def hidden_unit_records(alpha, beta, resid, w2col, kinks, slopes, icpts, nthreads=1):
    """Per-sample left rows plus unsorted (breakpoint, delta) records.

    Samples whose pre-activation does not depend on theta (``alpha == 0``, or
    breakpoints overflowing) contribute a constant row and no records.
    """
    n = alpha.shape[0]
    K = kinks.shape[0]
    rows = hidden_unit_rows(alpha, beta, resid, w2col, slopes, icpts)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        bps = (kinks[None, :] - beta[:, None]) / alpha[:, None]
    live = (alpha != 0.0) & np.all(np.isfinite(bps), axis=1)
    pos = live & (alpha > 0.0)
    neg = live & (alpha < 0.0)

    left = np.empty((n, 3))
    seg = np.searchsorted(kinks, beta, side="right")
    left[:] = rows[np.arange(n), seg]
    left[pos] = rows[pos, 0]
    left[neg] = rows[neg, K]

    d_pos = rows[pos, 1:] - rows[pos, :-1]
    d_neg = rows[neg, :-1] - rows[neg, 1:]
    rec_bp = np.concatenate((bps[pos].ravel(), bps[neg].ravel()))
    rec_d = np.concatenate((d_pos.reshape(-1, 3), d_neg.reshape(-1, 3)), axis=0)
    return left, rec_bp, np.ascontiguousarray(rec_d)
