import numpy as np
import pytest
from scipy import integrate

from nigmix.priors import PriorConfig, build_prior, lambda_prior_params


class TestPriorConfig:
    def test_defaults(self):
        cfg = PriorConfig()
        assert cfg.eta_mu == 1.0
        assert cfg.eta_tau == 0.3
        assert cfg.eta_beta == 0.3
        assert cfg.xi == 0.0
        assert cfg.lambda0 == 5.0
        assert cfg.nu_lambda == 1.0
        assert cfg.l0 == 1.0 and cfg.r0 == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            PriorConfig(eta_mu=0.0)
        with pytest.raises(ValueError):
            PriorConfig(xi=1.0)
        with pytest.raises(ValueError):
            PriorConfig(lambda_prior_family="weibull")
        with pytest.raises(ValueError):
            PriorConfig(concentration_model="pitman_yor")


class TestBuildPrior:
    def test_default_values_d3(self):
        prior = build_prior(PriorConfig(), np.zeros(3), np.eye(3))
        assert prior.s0 == 4.0
        np.testing.assert_allclose(prior.t0, 0.36 * np.eye(3), atol=1e-9)
        assert prior.u0 == pytest.approx(0.09)
        assert prior.w0 == 0.0
        assert prior.v0 == pytest.approx(1.0 / 0.09)
        np.testing.assert_array_equal(prior.n0, np.zeros(3))
        np.testing.assert_array_equal(prior.m0, np.zeros(3))

    def test_inverse_gaussian_lambda_prior(self):
        prior = build_prior(PriorConfig(), np.zeros(2), np.eye(2))
        assert (prior.f0, prior.g0, prior.h0) == (0.2, 5.0, -0.5)
        # prior mean of lambda: sqrt(g0/f0)
        assert np.sqrt(prior.g0 / prior.f0) == pytest.approx(5.0)

    def test_gamma_lambda_prior(self):
        cfg = PriorConfig(lambda_prior_family="gamma")
        prior = build_prior(cfg, np.zeros(2), np.eye(2))
        assert (prior.f0, prior.g0, prior.h0) == (0.4, 0.0, 1.0)
        assert 2.0 * prior.h0 / prior.f0 == pytest.approx(5.0)

    @pytest.mark.parametrize("family", ["inverse_gaussian", "gamma"])
    @pytest.mark.parametrize("lambda0,nu_lambda", [(5.0, 1.0), (0.7, 3.0)])
    def test_lambda_prior_mean_and_shape_by_quadrature(self, family, lambda0, nu_lambda):
        # prior mean lambda0 and shape ratio lambda0^2 / Var = nu_lambda,
        # for both families
        f0, g0, h0 = lambda_prior_params(family, lambda0, nu_lambda)

        def unnorm(x):
            tail = -0.5 * g0 / x if g0 > 0.0 else 0.0
            return np.exp((h0 - 1.0) * np.log(x) - 0.5 * f0 * x + tail)

        z = integrate.quad(unnorm, 0, np.inf, limit=400)[0]
        mean = integrate.quad(lambda x: x * unnorm(x), 0, np.inf, limit=400)[0] / z
        second = integrate.quad(lambda x: x * x * unnorm(x), 0, np.inf, limit=400)[0] / z
        var = second - mean * mean
        assert mean == pytest.approx(lambda0, rel=1e-6)
        assert mean**2 / var == pytest.approx(nu_lambda, rel=1e-6)

    def test_prior_tau_mean(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((3, 3))
        cov = a @ a.T + np.eye(3)
        cfg = PriorConfig(eta_tau=0.5)
        prior = build_prior(cfg, np.zeros(3), cov)
        tau_mean = prior.s0 * np.linalg.inv(prior.t0)
        np.testing.assert_allclose(
            tau_mean, np.linalg.inv(cfg.eta_tau**2 * cov), rtol=1e-8
        )

    def test_center_prior_covariance_at_zero_xi(self):
        cov = np.diag([2.0, 0.5])
        cfg = PriorConfig(eta_mu=1.3)
        prior = build_prior(cfg, np.ones(2), cov)
        assert prior.w0 == 0.0
        tau_mean = prior.s0 * np.linalg.inv(prior.t0)
        center_cov = np.linalg.inv(prior.u0 * tau_mean)
        ridged = cov + 1e-10 * (np.trace(cov) / 2) * np.eye(2)
        np.testing.assert_allclose(center_cov, cfg.eta_mu**2 * ridged, rtol=1e-10)

    def test_primed_quantities(self):
        mean = np.array([1.0, -2.0])
        prior = build_prior(PriorConfig(xi=0.4), mean, np.eye(2))
        np.testing.assert_allclose(
            prior.t0_prime, prior.t0 + prior.u0 * np.outer(mean, mean), rtol=1e-12
        )
        np.testing.assert_allclose(prior.m0_prime, prior.u0 * mean, rtol=1e-12)
        np.testing.assert_allclose(prior.n0_prime, prior.w0 * mean, rtol=1e-12)

    def test_block_scaling_positive_definite_for_any_xi(self):
        for xi in [-0.95, -0.3, 0.0, 0.6, 0.99]:
            prior = build_prior(PriorConfig(xi=xi), np.zeros(2), np.eye(2))
            assert prior.u0 * prior.v0 - prior.w0**2 > 0.0

    def test_degenerate_covariance_is_regularized(self):
        cov = np.zeros((2, 2))
        cov[0, 0] = 1.0  # constant second column
        prior = build_prior(PriorConfig(), np.zeros(2), cov)
        np.linalg.cholesky(prior.t0)

    def test_deterministic(self):
        mean, cov = np.array([0.5, 1.5]), np.diag([1.0, 3.0])
        a = build_prior(PriorConfig(), mean, cov)
        b = build_prior(PriorConfig(), mean, cov)
        np.testing.assert_array_equal(a.t0, b.t0)
        assert (a.f0, a.g0, a.h0) == (b.f0, b.g0, b.h0)

    def test_nu_tau_validation(self):
        with pytest.raises(ValueError):
            build_prior(PriorConfig(nu_tau=1.5), np.zeros(3), np.eye(3))
