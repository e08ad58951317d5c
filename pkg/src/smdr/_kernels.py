"""Numba inner loops: 1-D fused-lasso dynamic program and predictive recursion.

The fused-lasso solver is the exact O(n) dynamic program of N. Johnson,
generalized to per-point positive weights.  It maintains the derivative of
the running message as a piecewise-linear function encoded by knot
positions ``x`` with slope/intercept increments ``a``/``b``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_INV_SQRT_2PI = 0.3989422804014327


@njit(cache=True)
def dp_weighted(y, w, lam, beta, x, a, b, tm, tp):
    """Minimize sum_t w_t*(y_t-x_t)^2/2 + lam*sum|x_{t+1}-x_t| exactly.

    Writes the minimizer into ``beta``.  ``x``, ``a``, ``b`` must have
    length >= 2n and ``tm``, ``tp`` length >= n-1; they are scratch space.
    """
    n = y.shape[0]
    if n == 1:
        beta[0] = y[0]
        return
    if lam == 0.0:
        for i in range(n):
            beta[i] = y[i]
        return

    l = n - 1
    r = n
    tm[0] = y[0] - lam / w[0]
    tp[0] = y[0] + lam / w[0]
    x[l] = tm[0]
    x[r] = tp[0]
    a[l] = w[0]
    b[l] = -w[0] * y[0] + lam
    a[r] = -w[0]
    b[r] = w[0] * y[0] + lam
    afirst = w[1]
    bfirst = -w[1] * y[1] - lam
    alast = -w[1]
    blast = w[1] * y[1] - lam

    for k in range(1, n - 1):
        # where the current derivative crosses -lam (scan from the left)
        alo = afirst
        blo = bfirst
        lo = l
        while lo <= r and alo * x[lo] + blo <= -lam:
            alo += a[lo]
            blo += b[lo]
            lo += 1
        # where it crosses +lam (scan from the right)
        ahi = alast
        bhi = blast
        hi = r
        while hi >= lo and -(ahi * x[hi] + bhi) >= lam:
            ahi += a[hi]
            bhi += b[hi]
            hi -= 1

        tm[k] = (-lam - blo) / alo
        l = lo - 1
        x[l] = tm[k]
        tp[k] = (lam + bhi) / (-ahi)
        r = hi + 1
        x[r] = tp[k]
        a[l] = alo
        b[l] = blo + lam
        a[r] = ahi
        b[r] = bhi + lam

        afirst = w[k + 1]
        bfirst = -w[k + 1] * y[k + 1] - lam
        alast = -w[k + 1]
        blast = w[k + 1] * y[k + 1] - lam

    # last coordinate: zero of the unclipped derivative
    alo = afirst
    blo = bfirst
    lo = l
    while lo <= r and alo * x[lo] + blo <= 0.0:
        alo += a[lo]
        blo += b[lo]
        lo += 1
    beta[n - 1] = -blo / alo
    for k in range(n - 2, -1, -1):
        if beta[k + 1] > tp[k]:
            beta[k] = tp[k]
        elif beta[k + 1] < tm[k]:
            beta[k] = tm[k]
        else:
            beta[k] = beta[k + 1]


@njit(cache=True)
def dp_trails(v, offsets, ones, lam, out, x, a, b, tm, tp):
    """Solve the unit-weight fused lasso independently on each trail.

    ``v`` concatenates the per-trail inputs; ``offsets`` delimits trails.
    """
    for t in range(offsets.shape[0] - 1):
        s = offsets[t]
        e = offsets[t + 1]
        m = e - s
        dp_weighted(v[s:e], ones[:m], lam, out[s:e], x[: 2 * m], a[: 2 * m],
                    b[: 2 * m], tm[: max(m - 1, 1)], tp[: max(m - 1, 1)])


@njit(cache=True)
def predictive_recursion(z_seq, f0_seq, grid, g, pi0, decay):
    """One pass of predictive recursion over an observation sequence.

    ``g`` holds the unnormalized mixing density of the alternative on
    ``grid`` (total mass ``1 - pi0``) and is updated in place; the updated
    null weight is returned.  Quadrature is trapezoidal on the uniform grid.
    """
    m = grid.shape[0]
    du = grid[1] - grid[0]
    kern = np.empty(m)
    for t in range(z_seq.shape[0]):
        z = z_seq[t]
        tot = 0.0
        for j in range(m):
            d = z - grid[j]
            kj = _INV_SQRT_2PI * np.exp(-0.5 * d * d) * g[j]
            kern[j] = kj
            tot += kj
        tot -= 0.5 * (kern[0] + kern[m - 1])
        m1 = tot * du
        m0 = pi0 * f0_seq[t]
        denom = m0 + m1
        if denom <= 0.0:
            continue
        wt = (t + 2.0) ** (-decay)
        pi0 = (1.0 - wt) * pi0 + wt * m0 / denom
        sc = wt / denom
        for j in range(m):
            g[j] = (1.0 - wt) * g[j] + sc * kern[j]
    return pi0


@njit(cache=True)
def convolve_standard_normal(grid, g):
    """Tabulate integral of N(x - theta, 1) * g(theta) dtheta on the grid."""
    m = grid.shape[0]
    du = grid[1] - grid[0]
    out = np.empty(m)
    for i in range(m):
        acc = 0.0
        for j in range(m):
            d = grid[i] - grid[j]
            v = _INV_SQRT_2PI * np.exp(-0.5 * d * d) * g[j]
            if j == 0 or j == m - 1:
                v *= 0.5
            acc += v
        out[i] = acc * du
    return out
