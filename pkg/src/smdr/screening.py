"""Sequential screening with Bayesian missed-discovery-rate control.

The screen sorts voxels by posterior signal probability, then retains the
smallest prefix whose remaining (unselected) posterior mass falls below
``beta`` as a fraction of the total posterior mass.  ``bmdr_trace`` has
length n+1 with entry j equal to the BMDR after retaining the top-j
voxels, so ``trace[j_star] < beta <= trace[j_star - 1]`` reads directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePosteriorError
from .fused import node_values
from .posterior import PosteriorField, posterior_from_arrays


@dataclass
class Selection:
    """Boolean retention mask with its stopping index and diagnostics."""

    mask: np.ndarray
    j_star: int
    beta: float
    bmdr_trace: np.ndarray | None
    method_tag: str = "smdr"

    @property
    def n_selected(self) -> int:
        return int(np.sum(self.mask))


def bmdr(post: PosteriorField, mask) -> float:
    """Unselected posterior mass over total posterior mass."""
    mask = np.asarray(mask, dtype=bool).ravel()
    if mask.size != post.n:
        raise ValueError("mask length does not match the posterior field")
    total = float(np.sum(post.w))
    if total <= 0.0:
        raise DegeneratePosteriorError("posterior signal mass is zero")
    return float(np.sum(post.w[~mask])) / total


def bmdr_trace(post: PosteriorField) -> np.ndarray:
    """BMDR of retaining the top-j voxels, for j = 0..n."""
    cw = np.cumsum(post.w[post.order])
    total = cw[-1]
    if total <= 0.0:
        raise DegeneratePosteriorError("posterior signal mass is zero")
    trace = np.empty(post.n + 1)
    trace[0] = 1.0
    trace[1:] = (total - cw) / total
    return np.maximum(trace, 0.0)


def screen_smdr(post: PosteriorField, beta: float, method_tag: str = "smdr") -> Selection:
    """Retain the smallest posterior-ordered prefix with BMDR below beta."""
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must be in (0, 1)")
    trace = bmdr_trace(post)
    j_star = int(np.argmax(trace < beta))  # first index where the trace dips below beta
    mask = np.zeros(post.n, dtype=bool)
    mask[post.order[:j_star]] = True
    return Selection(mask=mask, j_star=j_star, beta=float(beta),
                     bmdr_trace=trace, method_tag=method_tag)


def oracle_screen(true_c, true_model, z, beta: float) -> Selection:
    """The same screen with posteriors computed from known model parameters."""
    zv = node_values(z)
    c = np.asarray(true_c, dtype=np.float64).ravel()
    if c.size != zv.size:
        raise ValueError("true prior and z sizes disagree")
    post = posterior_from_arrays(c, true_model.f0(zv), true_model.f1(zv))
    if post.s_hat <= 0.0:
        raise DegeneratePosteriorError("oracle posterior mass is zero")
    return screen_smdr(post, beta, method_tag="oracle")
