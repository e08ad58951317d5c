"""Scikit-learn style front end for the full screening pipeline.

``SpatialMDR.fit`` takes a 2-D field of z-statistics, estimates the
alternative density, fits the fused-lasso prior (selecting the penalty by
BIC unless fixed), and screens at the configured control level.  The
fitted spatial prior and densities can then score further fields of the
same shape through ``predict`` / ``transform``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import densities, fused, posterior, screening
from .grid import build_grid
from .validation import check_fraction, check_z_field


class SpatialMDR(BaseEstimator):
    """Spatially adaptive screening with missed-discovery-rate control.

    Parameters
    ----------
    beta : float, default=0.1
        Control level for the missed-discovery screen.
    lam : "auto" or float, default="auto"
        Fusion penalty; "auto" selects from ``lambda_grid`` by BIC.
    lambda_grid : array-like or None
        Ascending positive penalty grid for "auto" (default: 20 points,
        log-spaced in [0.05, 20]).
    null_kind : {"theoretical", "empirical"}, default="theoretical"
        Standard normal null, or a normal null fitted to the central bulk.
    sweeps : int, default=10
        Predictive-recursion passes for the alternative density.
    tol, max_iter : float, int
        Outer-loop stopping rule of the prior fit.
    seed : int, default=0
        Seed of the density-estimation sweep permutations.

    Attributes
    ----------
    graph_, density_model_, prior_, posterior_, selection_ : fitted state
    lambda_ : float, the penalty actually used
    mask_ : 2-D boolean retention mask at ``beta``
    """

    def __init__(self, beta=0.1, lam="auto", lambda_grid=None, null_kind="theoretical",
                 sweeps=10, tol=1e-5, max_iter=60, seed=0):
        self.beta = beta
        self.lam = lam
        self.lambda_grid = lambda_grid
        self.null_kind = null_kind
        self.sweeps = sweeps
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y=None):
        X = check_z_field(X)
        check_fraction("beta", self.beta)
        height, width = X.shape
        zv = X.ravel()

        if self.null_kind == "empirical":
            base = densities.estimate_empirical_null(zv)
        elif self.null_kind == "theoretical":
            base = densities.theoretical_null()
        else:
            raise ValueError(f"unknown null kind {self.null_kind!r}")

        self.shape_ = (height, width)
        self.graph_ = build_grid(width, height)
        self.density_model_ = densities.estimate_alt_density(
            zv, base, sweeps=self.sweeps, seed=self.seed)

        if self.lam == "auto":
            lam, fits = fused.select_lambda(zv, self.graph_, self.density_model_,
                                            grid=self.lambda_grid,
                                            tol=self.tol, max_iter=self.max_iter)
            self.prior_ = next(f for f in fits if f.lam == lam)
            self.lambda_ = lam
        else:
            lam = float(self.lam)
            self.prior_ = fused.fit_prior(zv, self.graph_, self.density_model_, lam,
                                          tol=self.tol, max_iter=self.max_iter)
            self.lambda_ = lam

        self.posterior_ = posterior.compute_posterior(zv, self.prior_, self.density_model_)
        self.selection_ = screening.screen_smdr(self.posterior_, self.beta)
        self.mask_ = self.selection_.mask.reshape(self.shape_)
        return self

    def _check_fitted(self):
        if not hasattr(self, "posterior_"):
            raise NotFittedError("this SpatialMDR instance is not fitted yet")

    def _posterior_for(self, X):
        if X is None:
            return self.posterior_
        X = check_z_field(X)
        if X.shape != self.shape_:
            raise ValueError(f"expected a field of shape {self.shape_}, got {X.shape}")
        return posterior.compute_posterior(X.ravel(), self.prior_, self.density_model_)

    def predict(self, X=None) -> np.ndarray:
        """Retention mask at ``beta``; for the fitted field when X is None."""
        self._check_fitted()
        post = self._posterior_for(X)
        return screening.screen_smdr(post, self.beta).mask.reshape(self.shape_)

    def transform(self, X=None) -> np.ndarray:
        """Per-voxel posterior signal probabilities."""
        self._check_fitted()
        return self._posterior_for(X).w.reshape(self.shape_)

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).mask_

    def select(self, beta: float) -> screening.Selection:
        """Screen the fitted posterior at another control level."""
        self._check_fitted()
        return screening.screen_smdr(self.posterior_, check_fraction("beta", beta))
