"""Compiled O(n^2) pair sums over the ordered time simplex of a discrete path.

Every public kernel takes coordinate arrays ``x`` and ``y`` (``y`` is all
zeros for one-dimensional paths) holding the left grid points B_0..B_{n-1}
and returns *per-row* partial sums: entry j is the sum over k < j.  Callers
reduce the rows with ``np.sum`` so the final summation order is fixed.

Plain ``np.cos``/``np.exp`` do not vectorize under numba without SVML, so the
inner loops use branch-free polynomial kernels instead.  Each row is written
into scratch buffers by one loop and reduced by a second loop compiled with
``reassoc``; that split is what lets LLVM emit packed code for both.  The
polynomials are accurate to a few ulp on the ranges checked in the tests.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_FM = {"nnan", "ninf", "nsz", "contract"}
_FM_SUM = {"nnan", "ninf", "nsz", "contract", "reassoc"}

# Phases beyond this lose accuracy in the three-term Cody-Waite reduction.
MAX_PHASE = 1.0e6


@njit(fastmath=_FM, inline="always", cache=True)
def _sincos(th):
    k = np.floor(th * 0.6366197723675814 + 0.5)
    r = ((th - k * 1.5707963267341256) - k * 6.0771005065061922e-11) - k * 2.0222662487959506e-21
    z = r * r
    s = r + r * z * (-1.66666666666666324348e-01 + z * (8.33333333332248946124e-03 + z * (
        -1.98412698298579493134e-04 + z * (2.75573137070700676789e-06 + z * (
            -2.50507602534068634195e-08 + z * 1.58969099521155010221e-10)))))
    c = 1.0 - 0.5 * z + z * z * (4.16666666666666019037e-02 + z * (-1.38888888888741095749e-03 + z * (
        2.48015872894767294178e-05 + z * (-2.75573143513906633035e-07 + z * (
            2.08757232129817482790e-09 + z * (-1.13596475577881948265e-11))))))
    q = k - 4.0 * np.floor(k * 0.25)
    swap = q == 1.0 or q == 3.0
    a = s if swap else c
    b = c if swap else s
    sgn_c = 1.0 if (q == 0.0 or q == 3.0) else -1.0
    sgn_s = 1.0 if q <= 1.0 else -1.0
    return sgn_c * a, sgn_s * b


@njit(fastmath=_FM, inline="always", cache=True)
def _exp_parts(xx):
    """exp(xx) for xx <= 0 as (mantissa polynomial, int64 exponent bits)."""
    xx = xx if xx > -708.0 else -708.0
    kk = np.floor(xx * 1.4426950408889634 + 0.5)
    r = (xx - kk * 0.6931471803691238) - kk * 1.9082149292705877e-10
    p = 1.0 + r * (1.0 + r * (0.5 + r * (1.6666666666666666e-01 + r * (4.1666666666666664e-02 + r * (
        8.3333333333333332e-03 + r * (1.3888888888888889e-03 + r * (1.9841269841269841e-04 + r * (
            2.4801587301587302e-05 + r * (2.7557319223985893e-06 + r * (2.7557319223985888e-07 + r * (
                2.5052108385441720e-08 + r * 2.0876756987868100e-09)))))))))))
    return p, (np.int64(kk) + 1023) << 52


@njit(fastmath=_FM, cache=True)
def _row_r2(xj, yj, x, y, m, r2):
    for k in range(m):
        dx = xj - x[k]
        dy = yj - y[k]
        r2[k] = dx * dx + dy * dy


@njit(fastmath=_FM, cache=True)
def _row_sincos(a, r2, m, bc, bs):
    for k in range(m):
        c, s = _sincos(a * r2[k])
        bc[k] = c
        bs[k] = s


@njit(fastmath=_FM, cache=True)
def _row_exp(b, r2, m, bp, eb):
    for k in range(m):
        p, e = _exp_parts(-b * r2[k])
        bp[k] = p
        eb[k] = e


@njit(fastmath=_FM_SUM, cache=True)
def _sum(buf, m):
    s = 0.0
    for k in range(m):
        s += buf[k]
    return s


@njit(fastmath=_FM_SUM, cache=True)
def _dot(a, b, m):
    s = 0.0
    for k in range(m):
        s += a[k] * b[k]
    return s


@njit(cache=True)
def phase_pair_rows(x, y, coefs):
    """rows[j, c] = sum_{k<j} exp(i coefs[c] |B_j - B_k|^2) as (re, im) arrays."""
    n = x.size
    nc = coefs.size
    re = np.zeros((n, nc))
    im = np.zeros((n, nc))
    r2 = np.empty(n)
    bc = np.empty(n)
    bs = np.empty(n)
    for j in range(1, n):
        _row_r2(x[j], y[j], x, y, j, r2)
        for c in range(nc):
            _row_sincos(coefs[c], r2, j, bc, bs)
            re[j, c] = _sum(bc, j)
            im[j, c] = _sum(bs, j)
    return re, im


@njit(cache=True)
def phase_pair_rows_ref(x, y, coefs):
    """Scalar libm version of :func:`phase_pair_rows` (reference and fallback)."""
    n = x.size
    nc = coefs.size
    re = np.zeros((n, nc))
    im = np.zeros((n, nc))
    for j in range(1, n):
        for c in range(nc):
            sr = 0.0
            si = 0.0
            for k in range(j):
                dx = x[j] - x[k]
                dy = y[j] - y[k]
                th = coefs[c] * (dx * dx + dy * dy)
                sr += math.cos(th)
                si += math.sin(th)
            re[j, c] = sr
            im[j, c] = si
    return re, im


@njit(cache=True)
def gauss_pair_rows(x, y, coefs):
    """rows[j, c] = sum_{k<j} exp(-coefs[c] |B_j - B_k|^2), coefs >= 0."""
    n = x.size
    nc = coefs.size
    out = np.zeros((n, nc))
    r2 = np.empty(n)
    bp = np.empty(n)
    eb = np.empty(n, np.int64)
    ef = eb.view(np.float64)
    for j in range(1, n):
        _row_r2(x[j], y[j], x, y, j, r2)
        for c in range(nc):
            _row_exp(coefs[c], r2, j, bp, eb)
            out[j, c] = _dot(bp, ef, j)
    return out


@njit(cache=True)
def gauss_pair_rows_sorted(xs, coef, cutoff):
    """One-dimensional windowed pair sum on sorted positions.

    rows[i] = sum over i' > i with xs[i'] - xs[i] < cutoff of
    exp(-coef (xs[i'] - xs[i])^2).  Since the kernel is symmetric, the total
    equals the simplex sum over time-ordered pairs.
    """
    n = xs.size
    out = np.zeros(n)
    r2 = np.empty(n)
    bp = np.empty(n)
    eb = np.empty(n, np.int64)
    ef = eb.view(np.float64)
    hi = 0
    for i in range(n):
        if hi < i + 1:
            hi = i + 1
        while hi < n and xs[hi] - xs[i] < cutoff:
            hi += 1
        m = hi - i - 1
        for k in range(m):
            d = xs[i + 1 + k] - xs[i]
            r2[k] = d * d
        _row_exp(coef, r2, m, bp, eb)
        out[i] = _dot(bp, ef, m)
    return out


@njit(fastmath=_FM, cache=True)
def _row_chi2(xj, yj, x, y, m, inv2t, bx, by, eb):
    for k in range(m):
        dx = xj - x[k]
        dy = yj - y[k]
        rr = dx * dx + dy * dy
        rr = rr if rr > 1e-300 else 1e-300
        p, e = _exp_parts(-inv2t * rr)
        w = p / rr
        bx[k] = dx * w
        by[k] = dy * w
        eb[k] = e


@njit(cache=True)
def chi0_rows_2d(x, y, t_end, dt):
    """chi_0 at each grid time r_j = j dt: -(1/pi) sum_{k<j} dt D exp(-|D|^2/(2T)) / |D|^2."""
    n = x.size
    cx = np.zeros(n)
    cy = np.zeros(n)
    bx = np.empty(n)
    by = np.empty(n)
    eb = np.empty(n, np.int64)
    ef = eb.view(np.float64)
    for j in range(1, n):
        big_t = t_end - j * dt
        if big_t <= 0.0:
            continue
        _row_chi2(x[j], y[j], x, y, j, 0.5 / big_t, bx, by, eb)
        cx[j] = -dt / np.pi * _dot(bx, ef, j)
        cy[j] = -dt / np.pi * _dot(by, ef, j)
    return cx, cy


@njit(cache=True)
def chi0_rows_1d(x, t_end, dt):
    """chi_0 at r_j: -sum_{k<j} dt sign(D) erfc(|D| / sqrt(2T))."""
    n = x.size
    out = np.zeros(n)
    for j in range(1, n):
        big_t = t_end - j * dt
        if big_t <= 0.0:
            continue
        scale = 1.0 / math.sqrt(2.0 * big_t)
        s = 0.0
        for k in range(j):
            d = x[j] - x[k]
            if d > 0.0:
                s += math.erfc(d * scale)
            elif d < 0.0:
                s -= math.erfc(-d * scale)
        out[j] = -dt * s
    return out
