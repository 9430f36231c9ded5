"""Tests for the sequential solvers, ensembles, and rate estimation."""

import numpy as np
import pytest

from gdlab.problem import (
    Dataset,
    dataset_from_rows,
    gen_dataset,
    hessian,
    range_projector,
)
from gdlab.solvers import (
    SolverConfig,
    default_fit_window,
    estimate_rate,
    run_ensemble,
    run_gd,
    run_sgd,
)
from gdlab.theory import optimal_rate


def planted_1d(x, w_star):
    X = np.array([[float(x)]])
    return Dataset(X=X, y=np.array([float(x * w_star)]),
                   w_star=np.array([float(w_star)]), normalized=abs(x) == 1.0,
                   kind="custom", seed=0)


class TestRunGd:
    def test_single_exact_step(self):
        # x = 2, w* = 3: H = 4 and eta = 0.25 zeroes the error in one step
        ds = planted_1d(2.0, 3.0)
        tr = run_gd(ds, SolverConfig(eta=0.25, m=1, max_iters=10, stop_tol=1e-30))
        assert tr.status == "converged"
        assert tr.err_sq_range[0] == pytest.approx(9.0, abs=1e-12)
        assert tr.err_sq_range[1] == 0.0

    def test_zero_step_size_is_identity(self):
        ds = gen_dataset(4, 4, "gaussian", seed=5)
        tr = run_gd(ds, SolverConfig(eta=0.0, m=4, max_iters=20))
        assert np.all(tr.err_sq_range == tr.err_sq_range[0])

    def test_orthonormal_contraction_ratio(self):
        # all eigenvalues are 1/8, so eta = 4 contracts squared error by
        # (1 - 0.5)^2 every iteration; cross-check against dense powers
        ds = gen_dataset(8, 8, "orthonormal", seed=3)
        tr = run_gd(ds, SolverConfig(eta=4.0, m=8, max_iters=15))
        ratios = tr.err_sq_range[1:] / tr.err_sq_range[:-1]
        assert np.allclose(ratios, 0.25, atol=1e-10)
        H = hessian(ds)
        A = np.eye(8) - 4.0 * H
        delta = -ds.w_star.copy()
        for t in range(1, 6):
            delta = A @ delta
            assert np.isclose(tr.err_sq_range[t], delta @ delta, rtol=1e-10)

    def test_divergence_recorded_not_raised(self):
        ds = gen_dataset(8, 8, "orthonormal", seed=3)  # lambda_max = 1/8
        tr = run_gd(ds, SolverConfig(eta=64.0, m=8, max_iters=100))
        assert tr.status == "diverged"

    def test_batch_sizes_full(self):
        ds = gen_dataset(5, 5, "gaussian", seed=1)
        tr = run_gd(ds, SolverConfig(eta=0.1, m=5, max_iters=7))
        assert np.all(tr.batch_size[1:] == 5)
        assert tr.batch_size[0] == 0

    def test_sampler_mismatch(self):
        ds = gen_dataset(4, 4, "gaussian", seed=1)
        with pytest.raises(ValueError):
            run_gd(ds, SolverConfig(eta=0.1, m=4, sampler="bernoulli"))
        with pytest.raises(ValueError):
            run_sgd(ds, SolverConfig(eta=0.1, m=4, sampler="full"))


class TestRunSgd:
    def test_full_mean_batch_is_bitwise_gd(self):
        ds = gen_dataset(8, 8, "gaussian", seed=13)
        gd = run_gd(ds, SolverConfig(eta=0.6, m=8, sampler="full", max_iters=25))
        sgd = run_sgd(ds, SolverConfig(eta=0.6, m=8, sampler="bernoulli", max_iters=25, seed=99))
        assert np.array_equal(gd.err_sq_range, sgd.err_sq_range)
        assert np.array_equal(gd.loss, sgd.loss)
        assert np.array_equal(gd.w_final, sgd.w_final)
        assert np.all(sgd.batch_size[1:] == 8)

    def test_two_outcome_expected_decay(self):
        # one unit sample at eta = m = 1/2: each draw is a no-op or an exact
        # solve with probability 1/2, so the mean squared error is err0 / 2^t
        ds = planted_1d(1.0, 1.7)
        cfg = SolverConfig(eta=0.5, m=0.5, sampler="bernoulli", max_iters=6)
        ens = run_ensemble(ds, cfg, runs=4000, seed=21)
        stack = np.stack([tr.err_sq_range for tr in ens.traces])
        err0 = stack[0, 0]
        for t in range(1, 7):
            expect = err0 * 0.5 ** t
            se = stack[:, t].std(ddof=1) / np.sqrt(stack.shape[0])
            assert abs(ens.mean_curve[t] - expect) <= 4 * se

    def test_orthonormal_mean_contraction(self):
        # mean squared-error ratio per iteration approaches 1 - m/n
        ds = gen_dataset(32, 32, "orthonormal", seed=320)
        cfg = SolverConfig(eta=8.0, m=8.0, sampler="bernoulli", max_iters=12)
        ens = run_ensemble(ds, cfg, runs=500, seed=7)
        ratios = ens.mean_curve[1:] / ens.mean_curve[:-1]
        assert np.all(np.abs(ratios - 0.75) <= 0.05)

    def test_fixed_sampler_batch_sizes(self):
        ds = gen_dataset(6, 6, "gaussian", seed=2)
        tr = run_sgd(ds, SolverConfig(eta=0.3, m=2.4, sampler="fixed", max_iters=30, seed=4))
        assert np.all(tr.batch_size[1:] == 2)

    def test_empty_bernoulli_draw_is_noop(self):
        ds = gen_dataset(2, 4, "gaussian", seed=8)
        tr = run_sgd(ds, SolverConfig(eta=0.5, m=0.02, sampler="bernoulli",
                                      max_iters=50, seed=3))
        empty = tr.batch_size[1:] == 0
        assert empty.any()
        same = tr.err_sq_range[1:][empty] == tr.err_sq_range[:-1][empty]
        assert same.all()


class TestRunEnsemble:
    def test_single_run_mean_is_the_trace(self):
        ds = gen_dataset(4, 4, "gaussian", seed=3)
        cfg = SolverConfig(eta=0.2, m=2, sampler="bernoulli", max_iters=10)
        ens = run_ensemble(ds, cfg, runs=1, seed=5)
        assert np.array_equal(ens.mean_curve, ens.traces[0].err_sq_range)

    def test_deterministic_sampler_gives_identical_runs(self):
        ds = gen_dataset(4, 4, "gaussian", seed=3)
        cfg = SolverConfig(eta=0.2, m=4, sampler="full", max_iters=10)
        ens = run_ensemble(ds, cfg, runs=3, seed=5)
        for tr in ens.traces[1:]:
            assert np.array_equal(tr.err_sq_range, ens.traces[0].err_sq_range)
        assert np.array_equal(ens.mean_curve, ens.traces[0].err_sq_range)

    def test_mean_matches_closed_form(self):
        # eta = m = 2 on 8 orthonormal samples contracts the mean squared
        # error by exactly 3/4 per iteration
        ds = gen_dataset(8, 8, "orthonormal", seed=9)
        cfg = SolverConfig(eta=2.0, m=2.0, sampler="bernoulli", max_iters=8)
        ens = run_ensemble(ds, cfg, runs=2000, seed=31)
        stack = np.stack([tr.err_sq_range for tr in ens.traces])
        for t in range(1, 9):
            expect = ens.mean_curve[0] * 0.75 ** t
            se = stack[:, t].std(ddof=1) / np.sqrt(stack.shape[0])
            assert abs(ens.mean_curve[t] - expect) <= 3 * se

    def test_run_seeds_derived_from_master(self):
        ds = gen_dataset(4, 4, "gaussian", seed=3)
        cfg = SolverConfig(eta=0.2, m=2, sampler="bernoulli", max_iters=5, seed=123)
        a = run_ensemble(ds, cfg, runs=4, seed=77)
        b = run_ensemble(ds, cfg, runs=4, seed=77)
        assert np.array_equal(a.mean_curve, b.mean_curve)
        seeds = [tr.config.seed for tr in a.traces]
        assert len(set(seeds)) == 4


class TestEstimateRate:
    def test_exact_geometric_decay(self):
        fit = estimate_rate([1.0, 0.5, 0.25, 0.125])
        assert fit.rate == pytest.approx(0.5, rel=1e-12)
        assert fit.residual <= 1e-12
        assert fit.status == "ok"

    def test_constant_curve_does_not_contract(self):
        fit = estimate_rate([2.0, 2.0, 2.0, 2.0])
        assert fit.rate == pytest.approx(1.0, abs=1e-12)
        assert fit.status == "non-contracting"

    def test_gd_rate_matches_condition_number_prediction(self):
        # two-level spectrum: the fit recovers the predicted full-batch rate
        rng = np.random.default_rng(44)
        Q, R = np.linalg.qr(rng.standard_normal((8, 8)))
        Q = Q * np.sign(np.diag(R))
        X = Q * np.sqrt(8 * np.array([1.0] * 4 + [0.25] * 4))
        ds = dataset_from_rows(X, seed=45)
        pred = optimal_rate(8, 8, 1.0, 0.25)
        tr = run_gd(ds, SolverConfig(eta=pred.eta_opt, m=8, max_iters=40))
        window = default_fit_window(tr.err_sq_range)
        fit = estimate_rate(tr.err_sq_range, window)
        assert abs(fit.rate - pred.g_opt) <= 0.01 * pred.g_opt

    def test_window_validation(self):
        with pytest.raises(ValueError, match="at least 3"):
            estimate_rate([1.0, 0.5], (0, 2))
        with pytest.raises(ValueError, match="nonpositive"):
            estimate_rate([1.0, 0.0, 0.25, 0.1])

    def test_default_window_skips_transient_and_floor(self):
        curve = [1.0] + [0.5 ** t for t in range(1, 30)] + [1e-300] * 5
        start, end = default_fit_window(curve, start=5)
        assert start == 5
        assert end <= 30
        seg = np.asarray(curve[start:end])
        assert np.all(seg >= 1e-12)


class TestSolverInvariants:
    def _null_setup(self):
        ds = gen_dataset(4, 8, "gaussian", seed=60)
        rp = range_projector(hessian(ds))
        rng = np.random.default_rng(61)
        u = rp.residual(rng.standard_normal(8))
        u /= np.linalg.norm(u)
        w0 = ds.w_star + rp.project(rng.standard_normal(8)) + u
        return ds, rp, u, w0

    @pytest.mark.parametrize("sampler", ["full", "bernoulli"])
    def test_null_component_is_invariant(self, sampler):
        ds, rp, u, w0 = self._null_setup()
        cfg = SolverConfig(eta=0.4, m=2.0 if sampler == "bernoulli" else 4.0,
                           sampler=sampler, max_iters=100, seed=5, w0=w0,
                           record_iterates=True)
        tr = run_gd(ds, cfg) if sampler == "full" else run_sgd(ds, cfg)
        comps = (tr.iterates - ds.w_star) @ u
        assert np.max(np.abs(comps - comps[0])) <= 1e-12 * abs(comps[0])

    def test_loss_equals_quadratic_error_form(self):
        ds = gen_dataset(6, 6, "gaussian", seed=7)
        H = hessian(ds)
        cfg = SolverConfig(eta=0.5, m=3, sampler="bernoulli", max_iters=30,
                           seed=8, record_iterates=True)
        tr = run_sgd(ds, cfg)
        for w, loss in zip(tr.iterates, tr.loss):
            delta = w - ds.w_star
            quad = delta @ H @ delta
            assert abs(loss - quad) <= 1e-10 * max(quad, 1e-30)

    def test_gd_error_strictly_decreases(self):
        ds = gen_dataset(6, 6, "gaussian", normalize=True, seed=19)
        lam1 = np.linalg.eigvalsh(hessian(ds))[-1]
        tr = run_gd(ds, SolverConfig(eta=0.8 / lam1, m=6, max_iters=50))
        assert np.all(np.diff(tr.err_sq_range) < 0)

    def test_bit_identical_reruns(self):
        ds = gen_dataset(5, 5, "gaussian", seed=2)
        cfg = SolverConfig(eta=0.3, m=2, sampler="bernoulli", max_iters=40, seed=17)
        a, b = run_sgd(ds, cfg), run_sgd(ds, cfg)
        assert np.array_equal(a.err_sq_range, b.err_sq_range)
        assert np.array_equal(a.batch_size, b.batch_size)
        assert np.array_equal(a.w_final, b.w_final)

    def test_bernoulli_batch_statistics(self):
        n, m, T = 16, 4.0, 2000
        ds = gen_dataset(n, n, "gaussian", seed=30)
        tr = run_sgd(ds, SolverConfig(eta=0.01, m=m, sampler="bernoulli",
                                      max_iters=T, seed=55))
        mean_batch = tr.batch_size[1:].mean()
        tol = 4 * np.sqrt(n * (m / n) * (1 - m / n) / T)
        assert abs(mean_batch - m) <= tol
