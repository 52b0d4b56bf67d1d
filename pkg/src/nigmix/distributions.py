"""Densities, expectations and samplers for the model's distribution families.

The generalized inverse Gaussian (GIG) family is the workhorse: it is both
the conjugate family of the normality parameter and the posterior family of
the per-point mixing scalars. Its unnormalized log density is

    (c - 1) log x - (a/2) x - (b/2) / x,        x > 0,

with log normalizing constant Delta(a, b, c) such that the density
exp(Delta) x^(c-1) exp(-(a/2)x - (b/2)/x) integrates to one. b = 0
degenerates to a gamma distribution with shape c and rate a/2, and
c = -1/2 to the inverse Gaussian.

All expectations involving Bessel ratios are evaluated through
``specfun.log_bessel_k`` so that no intermediate quantity can overflow.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import log_ndtr

from . import specfun
from .errors import NumericalBreakdownError, UndefinedMomentError

_LOG_2PI = np.log(2.0 * np.pi)


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GigParams:
    """Generalized inverse Gaussian parameters (a, b, c)."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b) and np.isfinite(self.c)):
            raise ValueError("GIG parameters must be finite")
        if self.a <= 0.0:
            raise ValueError("GIG requires a > 0")
        if self.b < 0.0:
            raise ValueError("GIG requires b >= 0")
        if self.b == 0.0 and self.c <= 0.0:
            raise ValueError("GIG with b = 0 (gamma case) requires c > 0")


@dataclass(frozen=True)
class InverseGaussianParams:
    """Inverse Gaussian with mean and shape parameters, both positive."""

    mean: float
    shape: float

    def __post_init__(self):
        if not (self.mean > 0.0 and self.shape > 0.0):
            raise ValueError("inverse Gaussian requires mean > 0 and shape > 0")


@dataclass(frozen=True)
class WishartParams:
    """Wishart in (degrees of freedom, rate-matrix) form.

    The rate parameterization matches the update equations: the density is
    proportional to det(x)^((dof-D-1)/2) exp(-tr(rate @ x) / 2) and the mean
    is dof * rate^-1.
    """

    dof: float
    rate: np.ndarray

    def __post_init__(self):
        rate = np.asarray(self.rate, dtype=float)
        object.__setattr__(self, "rate", rate)
        d = rate.shape[0]
        if rate.shape != (d, d) or not np.allclose(rate, rate.T):
            raise ValueError("Wishart rate must be a symmetric matrix")
        if self.dof <= d - 1:
            raise ValueError("Wishart requires dof > D - 1")
        try:
            np.linalg.cholesky(rate)
        except np.linalg.LinAlgError:
            raise ValueError("Wishart rate must be positive definite") from None


@dataclass(frozen=True)
class BlockNormalParams:
    """Joint normal over (center, bias) given a precision matrix tau.

    The joint precision is the block matrix [[u tau, w tau], [w tau, v tau]];
    u v - w^2 > 0 makes it positive definite whenever tau is.
    """

    m: np.ndarray
    n: np.ndarray
    u: float
    v: float
    w: float

    def __post_init__(self):
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float))
        object.__setattr__(self, "n", np.asarray(self.n, dtype=float))
        if self.u <= 0.0 or self.v <= 0.0:
            raise ValueError("block normal requires u > 0 and v > 0")
        if self.u * self.v - self.w**2 <= 0.0:
            raise ValueError("block normal requires u v - w^2 > 0")


@dataclass(frozen=True)
class NigParams:
    """Normal inverse Gaussian component parameters.

    The component mean is mu + beta and tau is the precision matrix of the
    mixture; lam controls normality (large lam -> Gaussian).
    """

    mu: np.ndarray
    beta: np.ndarray
    tau: np.ndarray
    lam: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        tau = np.atleast_2d(np.asarray(self.tau, dtype=float))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "tau", tau)
        d = mu.shape[0]
        if beta.shape != (d,) or tau.shape != (d, d):
            raise ValueError("inconsistent NIG parameter shapes")
        if not np.allclose(tau, tau.T):
            raise ValueError("tau must be symmetric")
        try:
            np.linalg.cholesky(tau)
        except np.linalg.LinAlgError:
            raise ValueError("tau must be positive definite") from None
        if not self.lam > 0.0:
            raise ValueError("lam must be positive")

    @property
    def dim(self):
        return self.mu.shape[0]


# ---------------------------------------------------------------------------
# GIG core (array-valued; the public API wraps these with validation)
# ---------------------------------------------------------------------------


def gig_log_norm_raw(a, b, c):
    """Delta(a, b, c) for arrays with b > 0 everywhere."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    root = np.sqrt(a * b)
    return -np.log(2.0) + 0.5 * c * (np.log(a) - np.log(b)) - specfun.log_bessel_k(c, root)


def gig_moments_raw(a, b, c):
    """(E[x], E[1/x], E[log x]) for arrays with b > 0 everywhere."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    root = np.sqrt(a * b)
    half_log_ba = 0.5 * (np.log(b) - np.log(a))
    lk = specfun.log_bessel_k(c, root)
    mean = np.exp(half_log_ba + specfun.log_bessel_k(c + 1.0, root) - lk)
    mean_inv = np.exp(-half_log_ba + specfun.log_bessel_k(c - 1.0, root) - lk)
    mean_log = half_log_ba + specfun.dlog_bessel_k_dorder(c, root)
    return mean, mean_inv, mean_log


def gig_log_norm(p):
    """Log normalizing constant of the GIG family.

    For b = 0 this is the gamma normalizer c log(a/2) - log Gamma(c).
    """
    if p.b == 0.0:
        return p.c * np.log(0.5 * p.a) - specfun.log_gamma(p.c)
    return float(gig_log_norm_raw(p.a, p.b, p.c))


def gig_moments(p, require_inv=True):
    """Expectations (E[x], E[1/x], E[log x]) of the GIG family.

    In the gamma case (b = 0) the inverse moment only exists for c > 1;
    with ``require_inv`` it raises, otherwise E[1/x] is reported as nan.
    """
    if p.b == 0.0:
        mean = 2.0 * p.c / p.a
        mean_log = specfun.digamma(p.c) - np.log(0.5 * p.a)
        if p.c > 1.0:
            mean_inv = 0.5 * p.a / (p.c - 1.0)
        elif require_inv:
            raise UndefinedMomentError(
                f"E[1/x] of a gamma with shape {p.c} <= 1 does not exist"
            )
        else:
            mean_inv = np.nan
        return mean, mean_inv, mean_log
    mean, mean_inv, mean_log = gig_moments_raw(p.a, p.b, p.c)
    return float(mean), float(mean_inv), float(mean_log)


def gig_kl(q, p):
    """KL(q || p) between two GIG laws, in closed form via the moments."""
    kl = gig_log_norm(q) - gig_log_norm(p)
    need_inv = q.b != p.b
    mean, mean_inv, mean_log = gig_moments(q, require_inv=need_inv)
    kl += (q.c - p.c) * mean_log
    kl -= 0.5 * (q.a - p.a) * mean
    if need_inv:
        kl -= 0.5 * (q.b - p.b) * mean_inv
    # exact zero for identical parameters; tiny negatives are roundoff
    return 0.0 if -1e-9 < kl < 0.0 else kl


# ---------------------------------------------------------------------------
# Samplers (all take an owned numpy Generator)
# ---------------------------------------------------------------------------


def sample_inverse_gaussian(p, rng):
    """One inverse Gaussian draw by the Michael-Schucany-Haas transformation."""
    mu, lam = p.mean, p.shape
    v = rng.standard_normal() ** 2
    x = mu + 0.5 * mu * mu * v / lam - (0.5 * mu / lam) * np.sqrt(
        4.0 * mu * lam * v + (mu * v) ** 2
    )
    if rng.random() <= mu / (mu + x):
        return x
    return mu * mu / x


def sample_wishart(dof, mean_matrix, rng):
    """Wishart draw parameterized by its mean; Bartlett decomposition.

    The scale is mean_matrix / dof, so draws average to mean_matrix.
    """
    mean_matrix = np.asarray(mean_matrix, dtype=float)
    d = mean_matrix.shape[0]
    if dof <= d - 1:
        raise ValueError("Wishart requires dof > D - 1")
    try:
        scale_chol = np.linalg.cholesky(mean_matrix / dof)
    except np.linalg.LinAlgError:
        raise ValueError("mean_matrix must be positive definite") from None
    bart = np.zeros((d, d))
    for i in range(d):
        bart[i, i] = np.sqrt(rng.chisquare(dof - i))
        for k in range(i):
            bart[i, k] = rng.standard_normal()
    factor = scale_chol @ bart
    return factor @ factor.T


def sample_mvn(mean, cov, rng):
    """Multivariate normal draw via the Cholesky factor of the covariance."""
    mean = np.asarray(mean, dtype=float)
    try:
        chol = np.linalg.cholesky(np.asarray(cov, dtype=float))
    except np.linalg.LinAlgError:
        raise ValueError("covariance must be positive definite") from None
    return mean + chol @ rng.standard_normal(mean.shape[0])


def sample_categorical(weights, rng):
    """Index drawn from a finite distribution on the simplex."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0.0) or not np.isclose(w.sum(), 1.0):
        raise ValueError("weights must be nonnegative and sum to 1")
    cum = np.cumsum(w)
    idx = int(np.searchsorted(cum, rng.random(), side="right"))
    return min(idx, len(w) - 1)


def sample_nig(p, rng):
    """Draw from the NIG component: y ~ IG(1, lam), then x | y."""
    y = sample_inverse_gaussian(InverseGaussianParams(1.0, p.lam), rng)
    tau_chol = np.linalg.cholesky(p.tau)
    z = rng.standard_normal(p.dim)
    # covariance given y is y * tau^-1 = y * L^-T L^-1
    noise = solve_triangular(tau_chol.T, z, lower=False)
    return p.mu + y * p.beta + np.sqrt(y) * noise


# ---------------------------------------------------------------------------
# Marginal NIG density
# ---------------------------------------------------------------------------


def nig_log_pdf(x, p):
    """Log density of the marginal NIG distribution.

    The mixing scalar integrates out in closed form because the integrand
    in y is an unnormalized GIG with c = -(D+1)/2:

        log p(x) = -(D+1)/2 log 2pi + log(lam)/2 + lam + log det(tau)/2
                   + (x - mu)^T tau beta - Delta(a, b, c)

    with a = lam + beta^T tau beta and b = lam + (x-mu)^T tau (x-mu).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != p.dim:
        raise ValueError(f"points must have dimension {p.dim}")
    d = p.dim
    c = -0.5 * (d + 1)
    tau_chol = np.linalg.cholesky(p.tau)
    logdet_tau = 2.0 * np.sum(np.log(np.diag(tau_chol)))
    tau_beta = p.tau @ p.beta
    a = p.lam + p.beta @ tau_beta
    diff = pts - p.mu
    half = diff @ tau_chol  # (x-mu)^T tau (x-mu) = ||(x-mu)^T L||^2
    quad = np.einsum("ij,ij->i", half, half)
    b = p.lam + quad
    cross = diff @ tau_beta
    out = (
        -0.5 * (d + 1) * _LOG_2PI
        + 0.5 * np.log(p.lam)
        + p.lam
        + 0.5 * logdet_tau
        + cross
        - gig_log_norm_raw(np.full_like(b, a), b, c)
    )
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# Truncated normal (posterior family of the fixed-shape model variant)
# ---------------------------------------------------------------------------


def truncated_normal_moments(loc, prec):
    """(mean, second moment) of a normal(loc, 1/prec) truncated to x > 0.

    Uses the hazard function phi/Phi evaluated through log_ndtr, which stays
    accurate however far the location sits below zero. Vectorizes over
    matching-shape arrays.
    """
    loc = np.asarray(loc, dtype=float)
    prec = np.asarray(prec, dtype=float)
    if np.any(prec <= 0.0):
        raise ValueError("precision must be positive")
    sigma = 1.0 / np.sqrt(prec)
    alpha = -loc / sigma
    log_phi = -0.5 * alpha * alpha - 0.5 * _LOG_2PI
    hazard = np.exp(log_phi - log_ndtr(-alpha))
    mean = loc + sigma * hazard
    var = sigma * sigma * (1.0 + alpha * hazard - hazard * hazard)
    return mean, var + mean * mean


def truncated_normal_kl(loc_q, prec_q, loc_p, prec_p):
    """KL between two zero-truncated normals in (location, precision) form."""
    mean_q, sq_q = truncated_normal_moments(loc_q, prec_q)
    var_q = sq_q - mean_q * mean_q
    log_z_q = log_ndtr(np.asarray(loc_q, dtype=float) * np.sqrt(prec_q))
    log_z_p = log_ndtr(np.asarray(loc_p, dtype=float) * np.sqrt(prec_p))
    kl = (
        0.5 * (np.log(prec_q) - np.log(prec_p))
        - log_z_q
        + log_z_p
        - 0.5 * prec_q * (var_q + (mean_q - loc_q) ** 2)
        + 0.5 * prec_p * (var_q + (mean_q - loc_p) ** 2)
    )
    # exact zero for identical parameters; tiny negatives are roundoff
    return np.where((kl > -1e-9) & (kl < 0.0), 0.0, kl)[()]


# ---------------------------------------------------------------------------
# Posterior-family expectations consumed by the E-step and the bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterExpectations:
    """Closed-form expectations of one cluster's posterior factors.

    c_mumu, c_mubeta and c_betabeta are the scalar coefficients of the
    identity in the covariance corrections: with P = u v - w^2,

        <tau mu mu^T>     = c_mumu I     + <tau> m m^T,   c_mumu     = v / P
        <tau mu beta^T>   = c_mubeta I   + <tau> m n^T,   c_mubeta   = -w / P
        <tau beta beta^T> = c_betabeta I + <tau> n n^T,   c_betabeta = u / P

    which reduce to the diagonal forms 1/u, 0, 1/v when w = 0.
    """

    lam: float
    log_lam: float
    lam_sq: float | None
    tau: np.ndarray
    logdet_tau: float
    mu: np.ndarray
    beta: np.ndarray
    c_mumu: float
    c_mubeta: float
    c_betabeta: float
    log_alpha: float


def dirichlet_log_weight_expectations(l):
    """<log alpha_j> under a Dirichlet with parameter vector l."""
    l = np.asarray(l, dtype=float)
    return specfun.digamma(l) - specfun.digamma(l.sum())


def stick_breaking_log_weight_expectations(l, r):
    """<log alpha_j> under independent Beta(l_j, r_j) stick fractions.

    Cumulative form: <log gamma_j> + sum over j' < j of <log(1 - gamma_j')>.
    """
    l = np.asarray(l, dtype=float)
    r = np.asarray(r, dtype=float)
    dig_sum = specfun.digamma(l + r)
    log_stick = specfun.digamma(l) - dig_sum
    log_rest = specfun.digamma(r) - dig_sum
    out = log_stick.copy()
    out[1:] += np.cumsum(log_rest)[:-1]
    return out


def wishart_mean_and_logdet(s, t):
    """(<tau>, <log det tau>) of a Wishart in (dof, rate) form."""
    t = np.asarray(t, dtype=float)
    d = t.shape[0]
    try:
        factor = cho_factor(t, lower=True)
    except np.linalg.LinAlgError:
        raise ValueError("Wishart rate must be positive definite") from None
    tau_mean = s * cho_solve(factor, np.eye(d))
    tau_mean = 0.5 * (tau_mean + tau_mean.T)
    logdet_t = 2.0 * np.sum(np.log(np.diag(factor[0])))
    logdet_mean = specfun.multivariate_digamma(d, 0.5 * s) + d * np.log(2.0) - logdet_t
    return tau_mean, logdet_mean


def family_expectations(state, j):
    """All posterior expectations of cluster j needed by the E-step."""
    p_j = state.u[j] * state.v[j] - state.w[j] ** 2
    if p_j <= 0.0:
        raise NumericalBreakdownError(
            f"posterior state corrupted: u v - w^2 = {p_j} for cluster {j}",
            cluster=j,
        )
    lam_sq = None
    if state.variant == "trun":
        lam, lam_sq = truncated_normal_moments(state.f[j], state.g[j])
        log_lam = np.nan  # not used by the fixed-shape variant
    elif state.g[j] == 0.0:
        lam = 2.0 * state.h[j] / state.f[j]
        log_lam = specfun.digamma(state.h[j]) - np.log(0.5 * state.f[j])
    else:
        mean, _, mean_log = gig_moments_raw(state.f[j], state.g[j], state.h[j])
        lam, log_lam = float(mean), float(mean_log)
    tau_mean, logdet_mean = wishart_mean_and_logdet(state.s[j], state.t[j])
    if state.concentration == "dpm":
        log_alpha = float(stick_breaking_log_weight_expectations(state.l, state.r)[j])
    else:
        log_alpha = float(dirichlet_log_weight_expectations(state.l)[j])
    return ClusterExpectations(
        lam=lam,
        log_lam=log_lam,
        lam_sq=lam_sq,
        tau=tau_mean,
        logdet_tau=logdet_mean,
        mu=state.m[j].copy(),
        beta=state.n[j].copy(),
        c_mumu=state.v[j] / p_j,
        c_mubeta=-state.w[j] / p_j,
        c_betabeta=state.u[j] / p_j,
        log_alpha=log_alpha,
    )
