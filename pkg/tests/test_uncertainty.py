"""Tests for observed-information errors, Wald intervals and calibration."""

import math
import warnings

import numpy as np
import pytest

import acfest.likelihood as lik
from acfest.likelihood import covariance_matrix, fit_mle, fit_whittle
from acfest.models import ModelParams, RationalSpectrum
from acfest.simulate import SimConfig, generate_gaussian, subsample
from acfest.uncertainty import (
    CoverageSummary,
    IntervalEstimate,
    NonPositiveCurvatureError,
    coverage_stats,
    fd_hessian,
    mle_std_errs,
    wald_intervals,
)

OU = RationalSpectrum(0)


def record(params, n, seed):
    cfg = SimConfig(OU, params, n_target=n, dt=1.0, pad_factor=2, seed=seed)
    return subsample(generate_gaussian(cfg), stride=1, count=n)


class TestFdHessian:
    def test_exact_on_quadratic(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((3, 3))
        a = a + a.T
        b = rng.standard_normal(3)

        def fn(x):
            return 0.5 * float(x @ a @ x) + float(b @ x)

        x0 = np.array([0.3, -1.0, 2.0])
        got = fd_hessian(fn, x0, np.array([1e-3, 1e-3, 1e-3]))
        np.testing.assert_allclose(got, a, rtol=1e-6, atol=1e-8)


class TestMleStdErrs:
    def test_separable_quadratic_oracle(self, monkeypatch):
        # A synthetic log-likelihood, exactly quadratic in the internal
        # coordinates with known curvature, pins down the coordinate map and
        # the delta-method transform end to end.
        va, vb, vc = 0.04, 0.25, 0.09

        def fake_loglik(series, kind, params):
            eta = (params.mu, math.log(params.sigma2), math.log(params.tau))
            return -0.5 * (
                (eta[0] - 0.3) ** 2 / va
                + (eta[1] - 0.2) ** 2 / vb
                + (eta[2] + 0.1) ** 2 / vc
            )

        monkeypatch.setattr(lik, "exact_loglik", fake_loglik)
        params_hat = ModelParams(0.3, math.exp(0.2), math.exp(-0.1))
        ts = record(ModelParams(0.0, 1.0, 1.0), 8, seed=1)
        se = mle_std_errs(ts, OU, params_hat)
        assert se["mu"] == pytest.approx(math.sqrt(va), rel=1e-7)
        assert se["sigma2"] == pytest.approx(params_hat.sigma2 * math.sqrt(vb), rel=1e-7)
        assert se["tau"] == pytest.approx(params_hat.tau * math.sqrt(vc), rel=1e-7)

    def test_mean_error_matches_gls_closed_form(self):
        # The likelihood is exactly quadratic in the mean, so the observed
        # information in that direction is the GLS precision.
        params = ModelParams(0.5, 1.0, 1.0)
        ts = record(params, 256, seed=55)
        fit = fit_mle(ts, OU, init=ModelParams(0.0, 1.0, 1.0))
        se = mle_std_errs(ts, OU, fit.params_hat)
        sigma = covariance_matrix(OU, fit.params_hat, ts.n, ts.dt)
        ones = np.ones(ts.n)
        closed = 1.0 / math.sqrt(float(ones @ np.linalg.solve(sigma, ones)))
        assert se["mu"] == pytest.approx(closed, rel=1e-4)

    def test_no_drift_warning_on_clean_fit(self):
        params = ModelParams(0.0, 1.0, 2.0)
        ts = record(params, 64, seed=7)
        fit = fit_mle(ts, OU, init=ModelParams(0.0, 1.0, 1.0))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            se = mle_std_errs(ts, OU, fit.params_hat)
        assert all(v > 0 for v in se.values())

    def test_whittle_errors_track_exact(self):
        params = ModelParams(0.5, 1.0, 1.0)
        ts = record(params, 256, seed=55)
        fe = fit_mle(ts, OU, init=ModelParams(0.0, 1.0, 1.0))
        fw = fit_whittle(ts, OU, init=ModelParams(0.0, 1.0, 1.0))
        se_e = mle_std_errs(ts, OU, fe.params_hat)
        se_w = mle_std_errs(ts, OU, fw.params_hat, loglik="whittle")
        for name in ("mu", "sigma2", "tau"):
            assert se_w[name] == pytest.approx(se_e[name], rel=0.10)

    def test_convex_direction_raises(self, monkeypatch):
        def convex_loglik(series, kind, params):
            eta = (params.mu, math.log(params.sigma2), math.log(params.tau))
            return eta[0] ** 2 + eta[1] ** 2 + eta[2] ** 2

        monkeypatch.setattr(lik, "exact_loglik", convex_loglik)
        ts = record(ModelParams(0.0, 1.0, 1.0), 8, seed=2)
        with pytest.raises(NonPositiveCurvatureError):
            mle_std_errs(ts, OU, ModelParams(0.1, 1.0, 1.0))

    def test_rough_surface_warns(self, monkeypatch):
        # Oscillation at the finite-difference scale makes the halved-step
        # Hessian disagree with the full-step one, which must be reported.
        def rough_loglik(series, kind, params):
            eta = (params.mu, math.log(params.sigma2), math.log(params.tau))
            ripple = -1e-6 * math.cos(1e5 * eta[0])
            return ripple - 500.0 * eta[0] ** 2 - eta[1] ** 2 - eta[2] ** 2

        monkeypatch.setattr(lik, "exact_loglik", rough_loglik)
        ts = record(ModelParams(0.0, 1.0, 1.0), 8, seed=3)
        with pytest.warns(RuntimeWarning, match="drift"):
            mle_std_errs(ts, OU, ModelParams(0.0, 1.0, 1.0))

    def test_unknown_loglik_name(self):
        ts = record(ModelParams(0.0, 1.0, 1.0), 8, seed=4)
        with pytest.raises(ValueError):
            mle_std_errs(ts, OU, ModelParams(0.0, 1.0, 1.0), loglik="profile")


class TestWaldIntervals:
    def test_geometry(self):
        params_hat = ModelParams(0.5, 2.0, 3.0)
        ses = {"mu": 0.1, "sigma2": 0.4, "tau": 0.6}
        ivs = {iv.param: iv for iv in wald_intervals(params_hat, ses, level=0.95)}
        assert set(ivs) == {"mu", "sigma2", "tau"}

        mu = ivs["mu"]
        assert mu.upper - mu.estimate == pytest.approx(mu.estimate - mu.lower)
        assert mu.upper - mu.lower == pytest.approx(2 * 1.959963984540054 * 0.1)

        for name in ("sigma2", "tau"):
            iv = ivs[name]
            assert iv.lower > 0
            # Log-scale symmetry: the interval is a constant ratio around
            # the point estimate.
            assert iv.upper / iv.estimate == pytest.approx(iv.estimate / iv.lower)
            assert iv.contains(iv.estimate)

    def test_level_changes_width(self):
        params_hat = ModelParams(0.0, 1.0, 1.0)
        ses = {"mu": 1.0, "sigma2": 0.5, "tau": 0.5}
        wide = {iv.param: iv for iv in wald_intervals(params_hat, ses, level=0.99)}
        narrow = {iv.param: iv for iv in wald_intervals(params_hat, ses, level=0.5)}
        for name in wide:
            assert wide[name].upper - wide[name].lower > (
                narrow[name].upper - narrow[name].lower
            )

    def test_skips_unusable_errors(self):
        params_hat = ModelParams(0.0, 1.0, 1.0)
        ivs = wald_intervals(params_hat, {"mu": math.nan, "sigma2": 0.0, "tau": 0.5})
        assert [iv.param for iv in ivs] == ["tau"]

    def test_validation(self):
        with pytest.raises(ValueError):
            IntervalEstimate("mu", 0.0, -1.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            IntervalEstimate("mu", 5.0, 1.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            IntervalEstimate("mu", 0.0, 1.0, -1.0, 1.0, level=1.5)


class TestCoverageStats:
    @staticmethod
    def make(param, estimate, se, level=0.95):
        z = 1.959963984540054
        return IntervalEstimate(
            param, estimate, se, estimate - z * se, estimate + z * se, level
        )

    def test_all_covered(self):
        truth = ModelParams(0.0, 1.0, 2.0)
        rng = np.random.default_rng(31)
        ests = [self.make("tau", 2.0 + 0.01 * rng.standard_normal(), 1.0) for _ in range(150)]
        stats = coverage_stats(ests, truth)
        summary = stats["tau"]
        assert isinstance(summary, CoverageSummary)
        assert summary.n == 150
        assert summary.coverage == 1.0
        assert summary.frac_beyond_3se == 0.0
        assert np.all(np.diff(summary.err_over_se_sq) >= 0)

    def test_known_mix(self):
        truth = ModelParams(0.0, 1.0, 1.0)
        near = [self.make("mu", 0.0, 1.0) for _ in range(120)]
        far = [self.make("mu", 10.0, 1.0) for _ in range(30)]
        stats = coverage_stats(near + far, truth)
        assert stats["mu"].coverage == pytest.approx(120 / 150)
        assert stats["mu"].frac_beyond_3se == pytest.approx(30 / 150)

    def test_order_invariant(self):
        truth = ModelParams(0.0, 1.0, 1.0)
        rng = np.random.default_rng(37)
        ests = [
            self.make("sigma2", float(math.exp(0.3 * rng.standard_normal())), 0.4)
            for _ in range(140)
        ]
        forward = coverage_stats(ests, truth)["sigma2"]
        backward = coverage_stats(ests[::-1], truth)["sigma2"]
        assert forward.coverage == backward.coverage
        np.testing.assert_array_equal(forward.err_over_se_sq, backward.err_over_se_sq)

    def test_too_few_replicates(self):
        truth = ModelParams(0.0, 1.0, 1.0)
        ests = [self.make("mu", 0.0, 1.0) for _ in range(99)]
        with pytest.raises(ValueError):
            coverage_stats(ests, truth)

    def test_unknown_parameter(self):
        truth = ModelParams(0.0, 1.0, 1.0)
        ests = [self.make("rho", 0.0, 1.0) for _ in range(120)]
        with pytest.raises(ValueError):
            coverage_stats(ests, truth)
