import numpy as np
import pytest
from scipy.stats import norm

from smdr.densities import tabulated_model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def model_with_normal_alt(z, mean, sd):
    """Density model with the true alternative N(mean, sd^2) tabulated finely."""
    z = np.asarray(z, dtype=np.float64)
    absc = np.linspace(z.min() - 1.0, z.max() + 1.0, 2000)
    return tabulated_model(absc, norm.pdf(absc, mean, sd))


def two_block_field(rng, side=8, mean=3.0):
    """Left half signals at N(mean,1), right half nulls; returns (z, split column)."""
    cols = np.arange(side)
    left = cols < side // 2
    z = np.where(left[None, :], rng.normal(mean, 1.0, (side, side)),
                 rng.normal(0.0, 1.0, (side, side)))
    return z.ravel(), left
