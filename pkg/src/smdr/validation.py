"""Input validation helpers for the estimator and CLI surfaces."""
from __future__ import annotations

import numpy as np


def check_z_field(X) -> np.ndarray:
    """Validate a 2-D field of finite statistics; returns float64 copy."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D field of statistics, got ndim={X.ndim}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"empty field of shape {X.shape}")
    bad = int(np.sum(~np.isfinite(X)))
    if bad:
        raise ValueError(f"field contains {bad} non-finite values")
    return X.copy()


def check_fraction(name: str, value: float, *, closed_left: bool = False) -> float:
    value = float(value)
    low_ok = value >= 0.0 if closed_left else value > 0.0
    if not (low_ok and value < 1.0):
        interval = "[0, 1)" if closed_left else "(0, 1)"
        raise ValueError(f"{name} must be in {interval}, got {value}")
    return value
