"""Per-voxel signal posteriors from a fitted prior field and densities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDensityError
from .fused import node_values


@dataclass
class PosteriorField:
    """Posterior signal probabilities, their sum, and the descending order.

    ``order`` sorts nodes by decreasing ``w`` with ties broken by ascending
    node index, so downstream selections are deterministic.
    """

    w: np.ndarray
    s_hat: float
    order: np.ndarray

    @property
    def n(self) -> int:
        return int(self.w.size)


def posterior_from_arrays(c, f0v, f1v) -> PosteriorField:
    """Posterior field from explicit per-node prior and density values."""
    c = np.asarray(c, dtype=np.float64).ravel()
    f0v = np.asarray(f0v, dtype=np.float64).ravel()
    f1v = np.asarray(f1v, dtype=np.float64).ravel()
    num = c * f1v
    den = num + (1.0 - c) * f0v
    if np.any(den <= 0.0) or not np.all(np.isfinite(den)):
        raise InvalidDensityError("both densities vanish at some observation")
    w = num / den
    order = np.argsort(-w, kind="stable")
    return PosteriorField(w=w, s_hat=float(np.sum(w)), order=order)


def compute_posterior(z, prior, model) -> PosteriorField:
    """Posterior field for observed statistics under a fitted prior."""
    zv = node_values(z)
    c = np.asarray(getattr(prior, "c", prior), dtype=np.float64).ravel()
    if c.size != zv.size:
        raise ValueError(f"prior has {c.size} nodes, z has {zv.size}")
    return posterior_from_arrays(c, model.f0(zv), model.f1(zv))


def estimate_signal_count(post: PosteriorField) -> float:
    """Posterior-mean signal count (the sum of the posteriors)."""
    return post.s_hat
