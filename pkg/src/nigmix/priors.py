"""Interpretable prior configuration and the hyperparameters built from it.

The prior is specified through ratios against the observed data spread:
eta_tau sizes clusters relative to the data covariance, eta_mu sizes the
spread of cluster centers, eta_beta sizes the bias relative to the cluster,
and xi couples center and bias. The normality prior is pinned by its mean
lambda0 and a confidence nu_lambda, realized either as an inverse Gaussian
or as a gamma distribution (both special cases of the conjugate family).
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .distributions import GigParams

LAMBDA_FAMILIES = ("inverse_gaussian", "gamma")
CONCENTRATION_MODELS = ("dirichlet", "dpm")


@dataclass(frozen=True)
class PriorConfig:
    """User-facing prior knobs; see module docstring for the geometry."""

    eta_mu: float = 1.0
    eta_tau: float = 0.3
    eta_beta: float = 0.3
    xi: float = 0.0
    lambda0: float = 5.0
    nu_tau: float | None = None  # resolved to D + 1 when the data are seen
    nu_lambda: float = 1.0
    l0: float = 1.0
    r0: float = 1.0
    lambda_prior_family: str = "inverse_gaussian"
    concentration_model: str = "dirichlet"

    def __post_init__(self):
        for name in ("eta_mu", "eta_tau", "eta_beta", "lambda0", "nu_lambda", "l0", "r0"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not -1.0 < self.xi < 1.0:
            raise ValueError("xi must lie in (-1, 1)")
        if self.lambda_prior_family not in LAMBDA_FAMILIES:
            raise ValueError(f"lambda_prior_family must be one of {LAMBDA_FAMILIES}")
        if self.concentration_model not in CONCENTRATION_MODELS:
            raise ValueError(f"concentration_model must be one of {CONCENTRATION_MODELS}")

    def with_family(self, family):
        return replace(self, lambda_prior_family=family)


@dataclass(frozen=True)
class PriorHyperparams:
    """All prior constants of the posterior update equations.

    The primed quantities fold the center/bias location into the Wishart
    rate and the linear terms, which is the form every update consumes:

        t0' = t0 + u0 m0 m0^T + w0 (m0 n0^T + n0 m0^T) + v0 n0 n0^T
        m0' = u0 m0 + w0 n0
        n0' = w0 m0 + v0 n0
    """

    l0: float
    r0: float
    f0: float
    g0: float
    h0: float
    s0: float
    t0: np.ndarray
    u0: float
    v0: float
    w0: float
    m0: np.ndarray
    n0: np.ndarray
    t0_prime: np.ndarray = field(repr=False)
    m0_prime: np.ndarray = field(repr=False)
    n0_prime: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.u0 * self.v0 - self.w0**2 <= 0.0:
            raise ValueError("prior requires u0 v0 - w0^2 > 0")
        GigParams(self.f0, self.g0, self.h0)
        for mat in (self.t0, self.t0_prime):
            try:
                np.linalg.cholesky(mat)
            except np.linalg.LinAlgError:
                raise ValueError("prior Wishart rate must be positive definite") from None

    @property
    def dim(self):
        return self.m0.shape[0]


def lambda_prior_params(family, lambda0, nu_lambda):
    """(f0, g0, h0) pinning the normality prior mean at lambda0.

    Inverse Gaussian: mean sqrt(g/f) = lambda0 and shape sqrt(fg) = nu_lambda.
    Gamma: mean 2h/f = lambda0 and shape h = nu_lambda.
    """
    if family == "inverse_gaussian":
        return nu_lambda / lambda0, nu_lambda * lambda0, -0.5
    if family == "gamma":
        return 2.0 * nu_lambda / lambda0, 0.0, nu_lambda
    raise ValueError(f"unknown lambda prior family: {family}")


def build_prior(config, data_mean, data_cov):
    """Assemble PriorHyperparams from the configuration and data statistics.

    Cluster centers are centered on the data mean, the bias prior on zero,
    and the Wishart rate scales the (ridge-regularized) data covariance so
    that the prior mean of tau is (eta_tau^2 Sigma_x)^-1.
    """
    data_mean = np.asarray(data_mean, dtype=float)
    data_cov = np.asarray(data_cov, dtype=float)
    d = data_mean.shape[0]
    if data_cov.shape != (d, d):
        raise ValueError("data_cov shape does not match data_mean")
    # constant columns must not break the Cholesky downstream
    ridge = 1e-10 * max(np.trace(data_cov) / d, 1.0)
    cov = data_cov + ridge * np.eye(d)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError("data covariance must be positive semidefinite") from None

    nu_tau = float(config.nu_tau) if config.nu_tau is not None else d + 1.0
    if nu_tau <= d - 1:
        raise ValueError(f"nu_tau must exceed D - 1 = {d - 1}")

    one_m_xi2 = 1.0 - config.xi**2
    u0 = config.eta_tau**2 / (config.eta_mu**2 * one_m_xi2)
    w0 = config.eta_tau * config.xi / (config.eta_mu * config.eta_beta * one_m_xi2)
    v0 = 1.0 / (config.eta_beta**2 * one_m_xi2)

    f0, g0, h0 = lambda_prior_params(
        config.lambda_prior_family, config.lambda0, config.nu_lambda
    )

    m0 = data_mean.copy()
    n0 = np.zeros(d)
    t0 = nu_tau * config.eta_tau**2 * cov
    t0_prime = (
        t0
        + u0 * np.outer(m0, m0)
        + w0 * (np.outer(m0, n0) + np.outer(n0, m0))
        + v0 * np.outer(n0, n0)
    )
    return PriorHyperparams(
        l0=config.l0,
        r0=config.r0,
        f0=f0,
        g0=g0,
        h0=h0,
        s0=nu_tau,
        t0=t0,
        u0=u0,
        v0=v0,
        w0=w0,
        m0=m0,
        n0=n0,
        t0_prime=t0_prime,
        m0_prime=u0 * m0 + w0 * n0,
        n0_prime=w0 * m0 + v0 * n0,
    )
