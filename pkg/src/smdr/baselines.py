"""Reference procedures: BH step-up, local-fdr step-up, independence MDR.

All three return the same ``Selection`` record as the spatial screen so the
benchmark harness can evaluate them uniformly.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import gaussian_kde, norm

from .densities import estimate_null_proportion, theoretical_null
from .errors import DegenerateSelectionError
from .fused import node_values
from .posterior import PosteriorField
from .screening import Selection, bmdr_trace, screen_smdr

KDE_GRID_POINTS = 2048


def z_to_pvalues(z) -> np.ndarray:
    """Two-sided normal p-values 2*(1 - Phi(|z|))."""
    zv = node_values(z)
    return 2.0 * norm.sf(np.abs(zv))


def bh_fdr(p, alpha: float, method_tag: str = "bh_fdr") -> Selection:
    """Benjamini-Hochberg step-up at level alpha."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    p = np.asarray(p, dtype=np.float64).ravel()
    n = p.size
    order = np.argsort(p, kind="stable")
    thresh = alpha * np.arange(1, n + 1) / n
    passed = np.nonzero(p[order] <= thresh)[0]
    k = int(passed[-1]) + 1 if passed.size else 0
    mask = np.zeros(n, dtype=bool)
    mask[order[:k]] = True
    return Selection(mask=mask, j_star=k, beta=float(alpha), bmdr_trace=None,
                     method_tag=method_tag)


def fdr_smoothing_select(post: PosteriorField, alpha: float,
                         method_tag: str = "fdr_smoothing") -> Selection:
    """Local-fdr step-up: largest prefix whose mean (1-w) stays <= alpha."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must be in [0, 1)")
    lf = 1.0 - post.w[post.order]
    means = np.cumsum(lf) / np.arange(1, post.n + 1)
    passing = np.nonzero(means <= alpha)[0]
    k = int(passing[-1]) + 1 if passing.size else 0
    mask = np.zeros(post.n, dtype=bool)
    mask[post.order[:k]] = True
    return Selection(mask=mask, j_star=k, beta=float(alpha),
                     bmdr_trace=bmdr_trace(post), method_tag=method_tag)


def _kde_marginal(zv: np.ndarray) -> np.ndarray:
    """Gaussian-kernel marginal density (Silverman bandwidth) at each point."""
    kde = gaussian_kde(zv, bw_method="silverman")
    grid = np.linspace(zv.min() - 1.0, zv.max() + 1.0, KDE_GRID_POINTS)
    return np.interp(zv, grid, kde(grid))


def mdr_independent(z, beta: float, method_tag: str = "mdr_independent",
                    pi0: float | None = None) -> Selection:
    """Constant-prior analogue of the spatial screen.

    Builds two-groups local posteriors from the characteristic-function
    null-proportion estimate and a kernel marginal, then applies the same
    smallest-prefix rule as the spatial screen.  Degenerate when the
    characteristic-function signal count n*(1 - pi0) vanishes (under one
    signal).  A precomputed ``pi0`` skips re-estimation.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must be in (0, 1)")
    zv = node_values(z)
    n = zv.size
    if pi0 is None:
        pi0 = estimate_null_proportion(zv)
    if n * (1.0 - pi0) < 1.0:
        raise DegenerateSelectionError("estimated signal count is zero")

    f0v = theoretical_null().f0(zv)
    marginal = np.maximum(_kde_marginal(zv), 1e-300)
    lfdr = np.clip(pi0 * f0v / marginal, 0.0, 1.0)
    w = 1.0 - lfdr
    order = np.argsort(-w, kind="stable")
    post = PosteriorField(w=w, s_hat=float(np.sum(w)), order=order)
    if post.s_hat <= 0.0:
        raise DegenerateSelectionError("posterior signal mass is zero")
    return screen_smdr(post, beta, method_tag=method_tag)
