# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Mirrors ``_fallback`` function by function."""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport fabs, isfinite, INFINITY

cnp.import_array()

UNBOUNDED = 1


def merge_records(left, const double[::1] bps, const double[:, ::1] deltas, double eps_rel):
    cdef Py_ssize_t n = bps.shape[0]
    cdef Py_ssize_t ncol = deltas.shape[1]
    cdef const double[::1] left_v = np.ascontiguousarray(left, dtype=np.float64)
    if n == 0:
        return np.empty(0), np.asarray(left_v).reshape(1, ncol).copy()

    mesh_a = np.empty(n)
    coeffs_a = np.empty((n + 1, ncol))
    cdef double[::1] mesh = mesh_a
    cdef double[:, ::1] coeffs = coeffs_a
    cdef Py_ssize_t i, q, g = 0
    cdef double tol, a

    for q in range(ncol):
        coeffs[0, q] = left_v[q]
    mesh[0] = bps[0]
    for q in range(ncol):
        coeffs[1, q] = deltas[0, q]
    for i in range(1, n):
        a = fabs(bps[i])
        tol = eps_rel * (a if a > 1.0 else 1.0)
        if bps[i] - bps[i - 1] > tol:
            g += 1
            mesh[g] = bps[i]
            for q in range(ncol):
                coeffs[g + 1, q] = deltas[i, q]
        else:
            for q in range(ncol):
                coeffs[g + 1, q] = coeffs[g + 1, q] + deltas[i, q]
    for i in range(1, g + 2):
        for q in range(ncol):
            coeffs[i, q] = coeffs[i - 1, q] + coeffs[i, q]
    return mesh_a[:g + 1].copy(), coeffs_a[:g + 2].copy()


def evaluate_rows(const double[::1] mesh, const double[:, ::1] coeffs, x):
    xa = np.ascontiguousarray(x, dtype=np.float64)
    flat = xa.reshape(-1)
    out_a = np.empty_like(flat)
    cdef const double[::1] xv = flat
    cdef double[::1] out = out_a
    cdef Py_ssize_t n = xv.shape[0], m = mesh.shape[0], ncol = coeffs.shape[1]
    cdef Py_ssize_t i, lo, hi, mid, q
    cdef double t, acc
    for i in range(n):
        t = xv[i]
        lo = 0
        hi = m
        while lo < hi:
            mid = (lo + hi) // 2
            if mesh[mid] <= t:
                lo = mid + 1
            else:
                hi = mid
        acc = coeffs[lo, ncol - 1]
        for q in range(ncol - 2, -1, -1):
            acc = acc * t + coeffs[lo, q]
        out[i] = acc
    return out_a.reshape(xa.shape)


cdef inline double _row_value(double c0, double c1, double c2, double x) nogil:
    return (c2 * x + c1) * x + c0


def minimize_rows(const double[::1] mesh, const double[:, ::1] coeffs, double hint,
                  double tie_rel, double flat_rel):
    cdef Py_ssize_t R = coeffs.shape[0], ncol = coeffs.shape[1]
    cdef Py_ssize_t M = mesh.shape[0]
    cdef Py_ssize_t r, q, lo_i, hi_i, mid, n_c = 0, k
    cdef double c0, c1, c2, flat1, flat2, v, x, lo, hi, best, band, dist, bd, bx

    cand_x_a = np.empty(M + R + 1)
    cand_v_a = np.empty(M + R + 1)
    cand_i_a = np.empty(M + R + 1, dtype=np.intp)
    cdef double[::1] cand_x = cand_x_a
    cdef double[::1] cand_v = cand_v_a
    cdef Py_ssize_t[::1] cand_i = cand_i_a

    # rounding in a prefix sum scales with the column, not with the row
    flat1 = 0.0
    flat2 = 0.0
    for r in range(R):
        if ncol > 1 and fabs(coeffs[r, 1]) > flat1:
            flat1 = fabs(coeffs[r, 1])
        if ncol > 2 and fabs(coeffs[r, 2]) > flat2:
            flat2 = fabs(coeffs[r, 2])
    flat1 *= flat_rel
    flat2 *= flat_rel
    for r in (0, R - 1):
        c1 = coeffs[r, 1] if ncol > 1 else 0.0
        c2 = coeffs[r, 2] if ncol > 2 else 0.0
        if c2 < -flat2:
            return UNBOUNDED, 0.0, 0.0, 0
        if c2 <= flat2:
            if r == 0 and c1 > flat1:
                return UNBOUNDED, 0.0, 0.0, 0
            if r == R - 1 and c1 < -flat1:
                return UNBOUNDED, 0.0, 0.0, 0

    # mesh points, evaluated with the row on their right
    for r in range(M):
        c0 = coeffs[r + 1, 0]
        c1 = coeffs[r + 1, 1] if ncol > 1 else 0.0
        c2 = coeffs[r + 1, 2] if ncol > 2 else 0.0
        cand_x[n_c] = mesh[r]
        cand_v[n_c] = _row_value(c0, c1, c2, mesh[r])
        cand_i[n_c] = r + 1
        n_c += 1
    # interior vertices
    for r in range(R):
        c2 = coeffs[r, 2] if ncol > 2 else 0.0
        if c2 > flat2:
            c0 = coeffs[r, 0]
            c1 = coeffs[r, 1]
            x = -c1 / (2.0 * c2)
            lo = mesh[r - 1] if r > 0 else -INFINITY
            hi = mesh[r] if r < R - 1 else INFINITY
            if x >= lo and x < hi:
                cand_x[n_c] = x
                cand_v[n_c] = _row_value(c0, c1, c2, x)
                cand_i[n_c] = r
                n_c += 1
    # the hint itself
    lo_i = 0
    hi_i = M
    while lo_i < hi_i:
        mid = (lo_i + hi_i) // 2
        if mesh[mid] <= hint:
            lo_i = mid + 1
        else:
            hi_i = mid
    c0 = coeffs[lo_i, 0]
    c1 = coeffs[lo_i, 1] if ncol > 1 else 0.0
    c2 = coeffs[lo_i, 2] if ncol > 2 else 0.0
    cand_x[n_c] = hint
    cand_v[n_c] = _row_value(c0, c1, c2, hint)
    cand_i[n_c] = lo_i
    n_c += 1

    best = cand_v[0]
    for k in range(1, n_c):
        if cand_v[k] < best:
            best = cand_v[k]
    band = best + tie_rel * (fabs(best) if fabs(best) > 1.0 else 1.0)
    r = -1
    for k in range(n_c):
        if cand_v[k] <= band:
            dist = fabs(cand_x[k] - hint)
            if r < 0 or dist < bd or (dist == bd and cand_x[k] < bx):
                r = k
                bd = dist
                bx = cand_x[k]
    return 0, float(cand_x[r]), float(cand_v[r]), int(cand_i[r])


def hidden_unit_rows(const double[::1] alpha, const double[::1] beta, const double[:, ::1] resid,
                     const double[::1] w2col, const double[::1] slopes, const double[::1] icpts):
    cdef Py_ssize_t n = alpha.shape[0], K1 = slopes.shape[0], D = w2col.shape[0]
    rows_a = np.empty((n, K1, 3))
    cdef double[:, :, ::1] rows = rows_a
    _fill_rows(alpha, beta, resid, w2col, slopes, icpts, rows, 1)
    return rows_a


cdef void _fill_rows(const double[::1] alpha, const double[::1] beta, const double[:, ::1] resid,
                     const double[::1] w2col, const double[::1] slopes, const double[::1] icpts,
                     double[:, :, ::1] rows, int nthreads) noexcept nogil:
    cdef Py_ssize_t n = alpha.shape[0], K1 = slopes.shape[0], D = w2col.shape[0]
    cdef Py_ssize_t s, k, d
    cdef double w2sq = 0.0, wr, rr, zs, zi
    for d in range(D):
        w2sq = w2sq + w2col[d] * w2col[d]
    for s in prange(n, num_threads=nthreads, schedule="static"):
        wr = 0.0
        rr = 0.0
        for d in range(D):
            wr = wr + resid[s, d] * w2col[d]
            rr = rr + resid[s, d] * resid[s, d]
        for k in range(K1):
            zs = slopes[k] * alpha[s]
            zi = slopes[k] * beta[s] + icpts[k]
            rows[s, k, 0] = rr - 2.0 * zi * wr + w2sq * zi * zi
            rows[s, k, 1] = -2.0 * zs * (wr - w2sq * zi)
            rows[s, k, 2] = w2sq * zs * zs


def hidden_unit_records(const double[::1] alpha, const double[::1] beta, const double[:, ::1] resid,
                        const double[::1] w2col, const double[::1] kinks, const double[::1] slopes,
                        const double[::1] icpts, int nthreads=1):
    cdef Py_ssize_t n = alpha.shape[0], K = kinks.shape[0], K1 = K + 1
    cdef Py_ssize_t s, k, q, seg, base, j
    rows_a = np.empty((n, K1, 3))
    cdef double[:, :, ::1] rows = rows_a
    if n < 4096:
        nthreads = 1
    _fill_rows(alpha, beta, resid, w2col, slopes, icpts, rows, nthreads)

    left_a = np.empty((n, 3))
    bp_a = np.empty(n * K)
    d_a = np.empty((n * K, 3))
    cdef double[:, ::1] left = left_a
    cdef double[::1] bp = bp_a
    cdef double[:, ::1] dl = d_a
    cdef double b, a
    cdef bint live
    cdef Py_ssize_t cnt = 0

    for s in range(n):
        a = alpha[s]
        live = a != 0.0
        if live:
            for k in range(K):
                b = (kinks[k] - beta[s]) / a
                if not isfinite(b):
                    live = False
                    break
        if not live:
            seg = 0
            while seg < K and kinks[seg] <= beta[s]:
                seg += 1
            for q in range(3):
                left[s, q] = rows[s, seg, q]
            continue
        if a > 0:
            for q in range(3):
                left[s, q] = rows[s, 0, q]
            for k in range(K):
                bp[cnt] = (kinks[k] - beta[s]) / a
                for q in range(3):
                    dl[cnt, q] = rows[s, k + 1, q] - rows[s, k, q]
                cnt += 1
        else:
            for q in range(3):
                left[s, q] = rows[s, K, q]
            for k in range(K):
                bp[cnt] = (kinks[k] - beta[s]) / a
                for q in range(3):
                    dl[cnt, q] = rows[s, k, q] - rows[s, k + 1, q]
                cnt += 1
    return left_a, bp_a[:cnt].copy(), d_a[:cnt].copy()
