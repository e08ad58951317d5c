import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.special import expit

from conftest import model_with_normal_alt, two_block_field
from smdr.densities import tabulated_model, theoretical_null
from smdr.fused import (GAMMA_BOUND, default_lambda_grid, fit_prior, fused_lasso_1d,
                        fusion_lambda_bound, objective, pooled_fit, select_lambda)
from smdr.grid import build_grid


def cvx_fused_1d(y, w, lam):
    import cvxpy as cp
    x = cp.Variable(len(y))
    obj = cp.sum(cp.multiply(w, cp.square(y - x))) / 2 + lam * cp.sum(cp.abs(cp.diff(x)))
    cp.Problem(cp.Minimize(obj)).solve(solver=cp.CLARABEL,
                                       tol_gap_abs=1e-12, tol_gap_rel=1e-12,
                                       tol_feas=1e-12)
    return np.asarray(x.value)


class TestFusedLasso1D:
    def test_lambda_zero_identity(self, rng):
        y = rng.normal(size=20)
        w = rng.uniform(0.5, 2.0, 20)
        np.testing.assert_array_equal(fused_lasso_1d(y, w, 0.0), y)

    def test_total_fusion_weighted_mean(self, rng):
        y = rng.normal(size=30)
        w = rng.uniform(0.5, 2.0, 30)
        lam = float(np.sum(w) * np.ptp(y))
        out = fused_lasso_1d(y, w, lam)
        assert np.ptp(out) == pytest.approx(0.0, abs=1e-10)
        assert out[0] == pytest.approx(np.average(y, weights=w), abs=1e-10)

    def test_alternating_instance_vs_qp(self):
        y = np.array([0.0, 1.0, 0.0, 1.0, 0.0, 1.0])
        w = np.ones(6)
        out = fused_lasso_1d(y, w, 0.3)
        ref = cvx_fused_1d(y, w, 0.3)
        np.testing.assert_allclose(out, ref, atol=1e-6)

    @pytest.mark.parametrize("lam", [0.0, 0.1, 1.0, 10.0])
    def test_random_instances_vs_qp(self, lam, rng):
        for _ in range(10):
            n = int(rng.integers(1, 9))
            y = rng.normal(0, 2, n)
            w = rng.uniform(0.2, 3.0, n)
            out = fused_lasso_1d(y, w, lam)
            ref = y if (n == 1 or lam == 0.0) else cvx_fused_1d(y, w, lam)
            np.testing.assert_allclose(out, ref, atol=1e-6)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            fused_lasso_1d([1.0, 2.0], [1.0, 0.0], 1.0)
        with pytest.raises(ValueError):
            fused_lasso_1d([1.0], [1.0], -0.5)
        with pytest.raises(ValueError):
            fused_lasso_1d([], [], 1.0)
        with pytest.raises(ValueError):
            fused_lasso_1d([1.0, 2.0], [1.0], 1.0)

    def test_single_point(self):
        np.testing.assert_array_equal(fused_lasso_1d([2.5], [3.0], 7.0), [2.5])


# value of z where the standard normal density equals 0.3
Z_F0_03 = math.sqrt(-2.0 * math.log(0.3 * math.sqrt(2.0 * math.pi)))


def flat_alt_model(level, lo=-10.0, hi=10.0):
    absc = np.linspace(lo, hi, 1000)
    return tabulated_model(absc, np.full(1000, level))


class TestObjective:
    def test_single_node_equal_densities(self):
        # f0(z)=f1(z)=0.3 makes the mixture weight irrelevant
        g = build_grid(1, 1)
        m = flat_alt_model(0.3)
        val = objective(np.array([0.0]), np.array([Z_F0_03]), m, 5.0, g)
        assert val == pytest.approx(1.2039728, abs=1e-6)

    def test_two_node_chain_hand_value(self):
        g = build_grid(2, 1)
        m = flat_alt_model(0.3)
        z = np.array([Z_F0_03, Z_F0_03])  # f0 = f1 = 0.3 at both nodes
        gamma = np.array([1.0, -1.0])
        val = objective(gamma, z, m, 0.5, g)
        assert val == pytest.approx(2.0 * (-math.log(0.3)) + 0.5 * 2.0, abs=1e-6)

    def test_constant_gamma_zero_penalty(self, rng):
        g = build_grid(4, 4)
        m = flat_alt_model(0.2)
        z = rng.normal(0, 1, 16)
        base = objective(np.full(16, 0.7), z, m, 0.0, g)
        for lam in (0.1, 5.0, 100.0):
            assert objective(np.full(16, 0.7), z, m, lam, g) == pytest.approx(base)


class TestFitPrior:
    def test_total_fusion_matches_pooled_problem(self, rng):
        z, _ = two_block_field(rng)
        g = build_grid(8, 8)
        m = model_with_normal_alt(z, 3.0, 1.0)
        lam = fusion_lambda_bound(z, m)
        fit = fit_prior(z, g, m, lam, tol=1e-10, max_iter=200)
        assert np.ptp(fit.gamma) < 1e-4
        # the shared level solves the single-node pooled problem
        f0v, f1v = m.f0(z), m.f1(z)

        def pooled_nll(gg):
            c = expit(gg)
            return -np.sum(np.log(c * f1v + (1 - c) * f0v))

        res = minimize_scalar(pooled_nll, bounds=(-GAMMA_BOUND, GAMMA_BOUND),
                              method="bounded", options={"xatol": 1e-10})
        assert pooled_nll(fit.gamma[0]) <= pooled_nll(res.x) + 1e-3
        assert abs(fit.gamma[0] - pooled_fit(z, m)) < 0.05

    def test_lambda_zero_hits_clamp_bounds(self, rng):
        # z placed where the likelihood ratio is bounded away from 1
        g = build_grid(4, 4)
        m = model_with_normal_alt(np.array([-6.0, 6.0]), 2.0, 1.0)
        z = np.concatenate([np.full(8, 3.0), np.full(8, -1.0)])  # log-LR = +-4
        fit = fit_prior(z, g, m, 0.0, tol=0.0, max_iter=100)
        hi = m.f1(z) > m.f0(z)
        assert np.all(fit.gamma[hi] == GAMMA_BOUND)
        assert np.all(fit.gamma[~hi] == -GAMMA_BOUND)

    def test_two_block_prior_contrast(self):
        gaps = []
        for seed in range(20):
            r = np.random.default_rng(5000 + seed)
            z, left = two_block_field(r)
            g = build_grid(8, 8)
            m = model_with_normal_alt(z, 3.0, 1.0)
            fit = fit_prior(z, g, m, 1.0, tol=1e-7, max_iter=100)
            c = fit.c.reshape(8, 8)
            gaps.append(c[:, :4].mean() - c[:, 4:].mean())
        assert np.mean(gaps) >= 0.3

    def test_objective_trace_non_increasing(self, rng):
        for seed in range(5):
            r = np.random.default_rng(seed)
            z = r.normal(0, 1.5, 64)
            g = build_grid(8, 8)
            m = model_with_normal_alt(z, 2.0, 1.0)
            fit = fit_prior(z, g, m, 0.8, tol=1e-8, max_iter=60)
            assert np.all(np.diff(fit.objective_trace) <= 0.0)

    def test_kkt_at_lambda_zero(self, rng):
        z = rng.normal(1.0, 1.5, 100)
        g = build_grid(10, 10)
        m = model_with_normal_alt(z, 2.0, 1.0)
        fit = fit_prior(z, g, m, 0.0, tol=0.0, max_iter=40)
        interior = np.abs(fit.gamma) < GAMMA_BOUND
        if np.any(interior):
            grad = expit(fit.gamma[interior]) - fit.responsibilities[interior]
            assert np.max(np.abs(grad)) < 1e-4

    def test_prior_c_matches_gamma(self, rng):
        z, _ = two_block_field(rng)
        g = build_grid(8, 8)
        m = model_with_normal_alt(z, 3.0, 1.0)
        fit = fit_prior(z, g, m, 0.5)
        np.testing.assert_allclose(fit.c, 1 / (1 + np.exp(-fit.gamma)), atol=1e-12)
        assert np.all(np.abs(fit.gamma) <= GAMMA_BOUND)
        assert fit.plateau_count <= g.n_nodes
        assert np.isfinite(fit.objective)

    def test_reports_not_converged(self, rng):
        z, _ = two_block_field(rng)
        g = build_grid(8, 8)
        m = model_with_normal_alt(z, 3.0, 1.0)
        fit = fit_prior(z, g, m, 1.0, tol=0.0, max_iter=2)
        assert fit.iterations <= 2
        if not fit.safeguard_hit:
            assert not fit.converged

    def test_rejects_bad_args(self, rng):
        z, _ = two_block_field(rng)
        g = build_grid(8, 8)
        m = model_with_normal_alt(z, 3.0, 1.0)
        with pytest.raises(ValueError):
            fit_prior(z, g, m, -1.0)
        with pytest.raises(ValueError):
            fit_prior(z[:10], g, m, 1.0)


class TestSelectLambda:
    def test_singleton_grid(self, rng):
        z, _ = two_block_field(rng)
        g = build_grid(8, 8)
        m = model_with_normal_alt(z, 3.0, 1.0)
        lam, fits = select_lambda(z, g, m, grid=[0.4])
        assert lam == 0.4
        assert len(fits) == 1 and fits[0].lam == 0.4

    def test_default_grid_spec(self):
        grid = default_lambda_grid()
        assert grid.size == 20
        assert grid[0] == pytest.approx(0.05)
        assert grid[-1] == pytest.approx(20.0)
        np.testing.assert_allclose(np.diff(np.log(grid)), np.diff(np.log(grid))[0])

    def test_pure_noise_prefers_heavy_fusion(self):
        # densities estimated from the noise itself, as in the pipeline
        from smdr.densities import estimate_alt_density, theoretical_null
        top_half = 0
        grid = default_lambda_grid()
        g = build_grid(32, 32)
        for seed in range(20):
            r = np.random.default_rng(7000 + seed)
            z = r.standard_normal(32 * 32)
            m = estimate_alt_density(z, theoretical_null(), sweeps=5, seed=seed)
            lam, _ = select_lambda(z, g, m, tol=1e-5, max_iter=40)
            if lam >= grid[10]:
                top_half += 1
        assert top_half >= 14  # >= 70% of 20 seeds

    def test_fits_cover_grid_in_order(self, rng):
        z, _ = two_block_field(rng)
        g = build_grid(8, 8)
        m = model_with_normal_alt(z, 3.0, 1.0)
        grid = [0.1, 1.0, 10.0]
        lam, fits = select_lambda(z, g, m, grid=grid)
        assert [f.lam for f in fits] == grid
        assert lam in grid

    def test_rejects_bad_grid(self, rng):
        z, _ = two_block_field(rng)
        g = build_grid(8, 8)
        m = model_with_normal_alt(z, 3.0, 1.0)
        for bad in ([], [0.0, 1.0], [2.0, 1.0], [-1.0]):
            with pytest.raises(ValueError):
                select_lambda(z, g, m, grid=bad)


def test_fusion_limit_bound_explicit(rng):
    z, _ = two_block_field(rng)
    g = build_grid(8, 8)
    m = model_with_normal_alt(z, 3.0, 1.0)
    lam = fusion_lambda_bound(z, m)
    fit = fit_prior(z, g, m, lam, tol=1e-10, max_iter=200)
    assert np.ptp(fit.gamma) < 1e-4
