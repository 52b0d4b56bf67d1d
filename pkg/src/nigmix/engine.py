"""The variational fitting loop: init, M-step, E-step, bound, pruning.

One iteration runs the M-step first (so the first iteration consumes the
one-hot k-means moments), then the E-step, then evaluates the bound and
finally prunes clusters whose effective count fell below the threshold.
Everything that could underflow is kept in log space; responsibilities are
normalized with a per-row max shift.

Model variants:

* ``invg`` / ``gam``: conjugate normality posterior in the generalized
  inverse Gaussian family (inverse Gaussian resp. gamma prior).
* ``trun``: the earlier fixed-shape model, with a zero-truncated normal
  posterior for the normality parameter.
* ``gmm``: plain Gaussian mixture baseline (delegated to baseline_gmm).

Concentration models: ``dd`` (finite Dirichlet) and ``dpm`` (truncated
stick-breaking with Beta posteriors).
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import distributions as dist
from .errors import DegenerateFitError, NumericalBreakdownError
from .priors import build_prior
from .specfun import (
    digamma,
    log_bessel_k,
    log_gamma,
    multivariate_digamma,
    multivariate_log_gamma,
)

_LOG_2PI = np.log(2.0 * np.pi)

VARIANTS = ("invg", "gam", "trun", "gmm")
CONCENTRATIONS = ("dd", "dpm")


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObservationSet:
    """Data matrix with its mean and covariance cached once."""

    data: np.ndarray
    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def from_array(cls, x):
        x = np.ascontiguousarray(np.asarray(x, dtype=float))
        if x.ndim != 2:
            raise ValueError("data must be a 2-d array of shape (N, D)")
        if x.shape[0] < 2:
            raise ValueError("need at least two observations")
        if not np.all(np.isfinite(x)):
            raise ValueError("data must be finite")
        cov = np.atleast_2d(np.cov(x, rowvar=False))
        return cls(data=x, mean=x.mean(axis=0), cov=cov)

    @property
    def n_points(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]


@dataclass
class HiddenMoments:
    """Per-point expectations of the hidden variables.

    zbar rows live on the simplex; ybar and yhat are the mixing-scalar mean
    and inverse mean given each cluster, with ybar * yhat >= 1 pointwise.
    """

    zbar: np.ndarray
    ybar: np.ndarray
    yhat: np.ndarray

    @property
    def n_clusters(self):
        return self.zbar.shape[1]

    def validate(self, atol=1e-9):
        if not np.allclose(self.zbar.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("responsibility rows must sum to 1")
        if np.any(self.ybar <= 0.0) or np.any(self.yhat <= 0.0):
            raise ValueError("mixing-scalar moments must be positive")
        if np.any(self.ybar * self.yhat < 1.0 - atol):
            raise ValueError("E[y] E[1/y] >= 1 violated")


@dataclass(frozen=True)
class SufficientStats:
    """Per-cluster weighted sums of the data."""

    zstar: np.ndarray   # sum_i zbar
    zplus: np.ndarray   # sum_i ybar zbar
    zminus: np.ndarray  # sum_i yhat zbar
    xstar: np.ndarray   # sum_i zbar x_i
    xminus: np.ndarray  # sum_i yhat zbar x_i
    sminus: np.ndarray  # sum_i yhat zbar x_i x_i^T


@dataclass(frozen=True)
class PosteriorState:
    """Per-cluster variational hyperparameters plus model tags."""

    variant: str
    concentration: str
    l: np.ndarray
    r: np.ndarray | None
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray | None
    s: np.ndarray
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    m: np.ndarray
    n: np.ndarray

    @property
    def n_clusters(self):
        return self.l.shape[0]

    @property
    def dim(self):
        return self.m.shape[1]

    def take(self, keep):
        """New state restricted to the clusters in ``keep`` (order kept)."""
        sliced = {
            name: (getattr(self, name)[keep] if getattr(self, name) is not None else None)
            for name in ("l", "r", "f", "g", "h", "s", "t", "u", "v", "w", "m", "n")
        }
        return replace(self, **sliced)


@dataclass(frozen=True)
class FitConfig:
    """Loop controls; defaults follow the synthetic-benchmark protocol."""

    m0: int = 50
    eps_z: float = 2.0
    eps_dl_coeff: float = 1e-5
    patience: int = 5
    max_iter: int = 1000
    seed: int = 0
    variant: str = "invg"
    concentration: str = "dd"
    alt_lambda_update: bool = False

    def __post_init__(self):
        if self.m0 < 1:
            raise ValueError("m0 must be at least 1")
        if self.eps_z <= 0.0 or self.eps_dl_coeff <= 0.0:
            raise ValueError("thresholds must be positive")
        if self.patience < 1 or self.max_iter < 1:
            raise ValueError("patience and max_iter must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.concentration not in CONCENTRATIONS:
            raise ValueError(f"concentration must be one of {CONCENTRATIONS}")


@dataclass(frozen=True)
class FitResult:
    labels: np.ndarray
    zbar: np.ndarray
    elbo_trace: np.ndarray
    n_clusters: int
    state: object
    converged: bool
    iterations: int

    @property
    def elbo(self):
        return float(self.elbo_trace[-1])


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def _kmeans_pp_centers(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2 / total), rng.random(), side="right"))
            idx = min(idx, n - 1)
        centers[j] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(x, centers, max_rounds=100):
    labels = None
    for _ in range(max_rounds):
        d2 = (
            np.sum(x * x, axis=1)[:, None]
            - 2.0 * x @ centers.T
            + np.sum(centers * centers, axis=1)[None, :]
        )
        new_labels = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(centers.shape[0]):
            mask = labels == j
            if np.any(mask):
                centers[j] = x[mask].mean(axis=0)
    return labels


def kmeans_init(data, m0, rng):
    """One-hot responsibilities from k-means, unit mixing moments.

    The seeding and Lloyd rounds run over a lexicographically sorted copy
    of the data, which makes the initialization (and hence the whole fit)
    invariant to permutations of the input rows.
    """
    x = data.data
    n = x.shape[0]
    if m0 > n:
        raise ValueError(f"initial cluster count {m0} exceeds N = {n}")
    order = np.lexsort(x.T[::-1])
    x_sorted = x[order]
    centers = _kmeans_pp_centers(x_sorted, m0, rng)
    labels_sorted = _lloyd(x_sorted, centers)
    labels = np.empty(n, dtype=int)
    labels[order] = labels_sorted
    used = np.unique(labels)
    remap = {int(old): new for new, old in enumerate(used)}
    labels = np.array([remap[int(lab)] for lab in labels])
    m = len(used)
    zbar = np.zeros((n, m))
    zbar[np.arange(n), labels] = 1.0
    ones = np.ones((n, m))
    return HiddenMoments(zbar=zbar, ybar=ones, yhat=ones.copy())


# ---------------------------------------------------------------------------
# Statistics and the M-step
# ---------------------------------------------------------------------------


def accumulate_stats(data, hm):
    """All six weighted sums in one pass, fixed summation order."""
    x = data.data
    wz_minus = hm.yhat * hm.zbar
    return SufficientStats(
        zstar=hm.zbar.sum(axis=0),
        zplus=(hm.ybar * hm.zbar).sum(axis=0),
        zminus=wz_minus.sum(axis=0),
        xstar=np.einsum("ij,id->jd", hm.zbar, x),
        xminus=np.einsum("ij,id->jd", wz_minus, x),
        sminus=np.einsum("ij,id,ie->jde", wz_minus, x, x),
    )


def m_step(stats, prior, variant, concentration, alt_lambda_update=False, trun_prior=None):
    """Posterior hyperparameters from prior constants plus statistics.

    The center/bias block solves the 2x2 system

        [u_j w_j; w_j v_j] [m_j; n_j] = [m0' + X-_j; n0' + X*_j]

    and the Wishart rate completes the square around the solution.
    """
    zs, zp, zm = stats.zstar, stats.zplus, stats.zminus
    m_clusters = zs.shape[0]

    l = prior.l0 + zs
    r = None
    if concentration == "dpm":
        r = prior.r0 + (zs.sum() - np.cumsum(zs))

    deviation = np.maximum(zp + zm - 2.0 * zs, 0.0)
    if variant == "trun":
        if trun_prior is None:
            raise ValueError("trun variant requires the truncated-normal prior")
        loc0, prec0 = trun_prior
        g = prec0 + zp
        f = (loc0 * prec0 + zs) / g
        h = None
    elif alt_lambda_update:
        # pairing with the count statistic in the rate slot, kept only for
        # comparison runs
        f = prior.f0 + 0.5 * zs
        g = prior.g0 + deviation
        h = np.full(m_clusters, prior.h0)
    else:
        f = prior.f0 + deviation
        g = np.full(m_clusters, prior.g0)
        h = prior.h0 + 0.5 * zs

    s = prior.s0 + zs
    u = prior.u0 + zm
    v = prior.v0 + zp
    w = prior.w0 + zs
    det = u * v - w * w
    bad = np.nonzero(det <= 0.0)[0]
    if bad.size:
        raise NumericalBreakdownError(
            f"block precision not positive definite for cluster {bad[0]}",
            cluster=int(bad[0]),
        )
    rhs_m = prior.m0_prime + stats.xminus
    rhs_n = prior.n0_prime + stats.xstar
    m = (v[:, None] * rhs_m - w[:, None] * rhs_n) / det[:, None]
    n = (-w[:, None] * rhs_m + u[:, None] * rhs_n) / det[:, None]

    completion = (
        u[:, None, None] * np.einsum("jd,je->jde", m, m)
        + w[:, None, None] * (np.einsum("jd,je->jde", m, n) + np.einsum("jd,je->jde", n, m))
        + v[:, None, None] * np.einsum("jd,je->jde", n, n)
    )
    t = prior.t0_prime + stats.sminus - completion
    t = 0.5 * (t + np.transpose(t, (0, 2, 1)))
    try:
        np.linalg.cholesky(t)
    except np.linalg.LinAlgError:
        for j in range(m_clusters):
            try:
                np.linalg.cholesky(t[j])
            except np.linalg.LinAlgError:
                raise NumericalBreakdownError(
                    f"Wishart rate lost positive definiteness for cluster {j}",
                    cluster=j,
                ) from None
    return PosteriorState(
        variant=variant, concentration=concentration,
        l=l, r=r, f=f, g=g, h=h, s=s, t=t, u=u, v=v, w=w, m=m, n=n,
    )


# ---------------------------------------------------------------------------
# E-step
# ---------------------------------------------------------------------------


class _Expectations:
    """Posterior expectations of all clusters at once (vectorized)."""

    __slots__ = (
        "lam", "log_lam", "lam_sq", "tau", "tau_chol", "logdet_tau",
        "log_alpha", "c_mumu", "c_mubeta", "c_betabeta",
    )

    def __init__(self, state):
        p = state.u * state.v - state.w**2
        bad = np.nonzero(p <= 0.0)[0]
        if bad.size:
            raise NumericalBreakdownError(
                f"posterior state corrupted: u v - w^2 <= 0 for cluster {bad[0]}",
                cluster=int(bad[0]),
            )
        self.c_mumu = state.v / p
        self.c_mubeta = -state.w / p
        self.c_betabeta = state.u / p

        m, d = state.m.shape
        self.lam_sq = None
        if state.variant == "trun":
            self.lam, self.lam_sq = dist.truncated_normal_moments(state.f, state.g)
            self.log_lam = None
        else:
            pos = state.g > 0.0
            self.lam = np.empty(m)
            self.log_lam = np.empty(m)
            if np.any(pos):
                mean, _, mean_log = dist.gig_moments_raw(
                    state.f[pos], state.g[pos], state.h[pos]
                )
                self.lam[pos] = mean
                self.log_lam[pos] = mean_log
            if np.any(~pos):
                neg = ~pos
                self.lam[neg] = 2.0 * state.h[neg] / state.f[neg]
                self.log_lam[neg] = digamma(state.h[neg]) - np.log(0.5 * state.f[neg])

        try:
            rate_chol = np.linalg.cholesky(state.t)
        except np.linalg.LinAlgError:
            raise NumericalBreakdownError(
                "Wishart rate lost positive definiteness", cluster=None
            ) from None
        logdet_t = 2.0 * np.sum(np.log(np.diagonal(rate_chol, axis1=1, axis2=2)), axis=1)
        eye = np.broadcast_to(np.eye(d), (m, d, d))
        self.tau = state.s[:, None, None] * np.linalg.solve(state.t, eye)
        self.tau = 0.5 * (self.tau + np.transpose(self.tau, (0, 2, 1)))
        self.tau_chol = np.linalg.cholesky(self.tau)
        self.logdet_tau = (
            multivariate_digamma(d, 0.5 * state.s) + d * np.log(2.0) - logdet_t
        )
        if state.concentration == "dpm":
            self.log_alpha = dist.stick_breaking_log_weight_expectations(state.l, state.r)
        else:
            self.log_alpha = dist.dirichlet_log_weight_expectations(state.l)


# responsibilities below exp(-46) ~ 1e-20 contribute nothing to any
# statistic; their mixing moments are pinned at the neutral value 1
_MOMENT_CUTOFF = -46.0


def e_step(data, state):
    """Responsibilities and mixing-scalar moments under the current posterior.

    Returns the new HiddenMoments together with the per-point log-sums of
    the unnormalized responsibilities (the data term of the bound).
    """
    x = data.data
    n, d = x.shape
    m = state.n_clusters
    c = -0.5 * (d + 1)
    exps = _Expectations(state)

    diff = x[None, :, :] - state.m[:, None, :]             # (M, N, D)
    half = np.einsum("jnd,jdk->jnk", diff, exps.tau_chol)  # tau = L L^T
    quad = np.einsum("jnk,jnk->jn", half, half)
    tau_n = np.einsum("jde,je->jd", exps.tau, state.n)
    cross = np.einsum("jnd,jd->jn", diff, tau_n)
    beta_quad = np.einsum("jd,jd->j", state.n, tau_n)

    if state.variant == "trun":
        a_vec = exps.lam_sq + d * exps.c_betabeta + beta_quad
        b_mat = (1.0 + d * exps.c_mumu)[:, None] + quad
        lam_term = exps.lam
    else:
        a_vec = exps.lam + d * exps.c_betabeta + beta_quad
        b_mat = (exps.lam + d * exps.c_mumu)[:, None] + quad
        lam_term = 0.5 * exps.log_lam + exps.lam
    const = (
        -0.5 * (d + 1) * _LOG_2PI
        + exps.log_alpha
        + lam_term
        + 0.5 * exps.logdet_tau
        - d * exps.c_mubeta  # equals + D w / P
    )

    root = np.sqrt(a_vec[:, None] * b_mat)
    lk_c = log_bessel_k(c, root)
    log_b = np.log(b_mat)
    log_a = np.log(a_vec)
    # minus the GIG normalizer Delta(a, b, c) of the mixing-scalar posterior
    log_rho = (
        const[:, None] + cross
        + np.log(2.0) - 0.5 * c * (log_a[:, None] - log_b) + lk_c
    ).T
    if not np.all(np.isfinite(log_rho)):
        i, j = np.argwhere(~np.isfinite(log_rho))[0]
        raise NumericalBreakdownError(
            f"non-finite responsibility for point {i}, cluster {j}", cluster=int(j)
        )

    row_max = log_rho.max(axis=1)
    shifted = np.exp(log_rho - row_max[:, None])
    row_sum = shifted.sum(axis=1)
    zbar = shifted / row_sum[:, None]
    log_rho_rowsums = row_max + np.log(row_sum)

    # mixing moments, evaluated only where the responsibility is material
    sel = (log_rho - row_max[:, None] > _MOMENT_CUTOFF).T
    ybar = np.ones((m, n))
    yhat = np.ones((m, n))
    root_sel = root[sel]
    lk_c_sel = lk_c[sel]
    lk_p = log_bessel_k(c + 1.0, root_sel)
    # downward recurrence, positive terms only since c < 0
    lk_m = np.logaddexp(lk_p, np.log(-2.0 * c) - np.log(root_sel) + lk_c_sel)
    half_log_ba = 0.5 * (log_b[sel] - np.broadcast_to(log_a[:, None], root.shape)[sel])
    ybar[sel] = np.exp(half_log_ba + lk_p - lk_c_sel)
    yhat[sel] = np.exp(-half_log_ba + lk_m - lk_c_sel)

    hm = HiddenMoments(zbar=zbar, ybar=ybar.T, yhat=yhat.T)
    return hm, log_rho_rowsums


# ---------------------------------------------------------------------------
# Evidence lower bound
# ---------------------------------------------------------------------------


def _dirichlet_kl(l, l0):
    total = l.sum()
    m = l.shape[0]
    return float(
        log_gamma(total)
        - log_gamma(m * l0)
        - np.sum(log_gamma(l))
        + m * log_gamma(l0)
        + np.sum((l - l0) * (digamma(l) - digamma(total)))
    )


def _beta_kl_sum(lq, rq, lp, rp):
    dig_sum = digamma(lq + rq)
    terms = (
        log_gamma(lq + rq) - log_gamma(lq) - log_gamma(rq)
        - log_gamma(lp + rp) + log_gamma(lp) + log_gamma(rp)
        + (lq - lp) * (digamma(lq) - dig_sum)
        + (rq - rp) * (digamma(rq) - dig_sum)
    )
    return float(np.sum(terms))


def _gig_log_norm_vec(f, g, h):
    """Normalizer of the normality posterior, gamma case where g = 0."""
    out = np.empty_like(f)
    pos = g > 0.0
    if np.any(pos):
        out[pos] = dist.gig_log_norm_raw(f[pos], g[pos], h[pos])
    if np.any(~pos):
        neg = ~pos
        out[neg] = h[neg] * np.log(0.5 * f[neg]) - log_gamma(h[neg])
    return out


def _lambda_kl_sum(state, prior):
    """Sum over clusters of KL between normality posteriors and the prior.

    The inverse-moment term drops because every update leaves the x^-1
    coefficient at its prior value.
    """
    f, g, h = state.f, state.g, state.h
    if np.any(g != prior.g0):
        # only the comparison-mode update moves g; fall back to the scalar op
        p0 = dist.GigParams(prior.f0, prior.g0, prior.h0)
        return sum(
            dist.gig_kl(dist.GigParams(f[j], g[j], h[j]), p0)
            for j in range(state.n_clusters)
        )
    mean = np.empty_like(f)
    mean_log = np.empty_like(f)
    pos = g > 0.0
    if np.any(pos):
        mean[pos], _, mean_log[pos] = dist.gig_moments_raw(f[pos], g[pos], h[pos])
    if np.any(~pos):
        neg = ~pos
        mean[neg] = 2.0 * h[neg] / f[neg]
        mean_log[neg] = digamma(h[neg]) - np.log(0.5 * f[neg])
    delta_q = _gig_log_norm_vec(f, g, h)
    delta_p = _gig_log_norm_vec(
        np.full_like(f, prior.f0), np.full_like(f, prior.g0), np.full_like(f, prior.h0)
    )
    kl = delta_q - delta_p + (h - prior.h0) * mean_log - 0.5 * (f - prior.f0) * mean
    kl = np.where((kl > -1e-9) & (kl < 0.0), 0.0, kl)
    return float(np.sum(kl))


def _normal_wishart_kl_sum(state, prior):
    """Sum over clusters of the joint (center, bias, precision) KL."""
    d = state.dim
    s, t = state.s, state.t
    chol = np.linalg.cholesky(t)
    logdet_t = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
    logdet_t0 = 2.0 * np.sum(np.log(np.diag(np.linalg.cholesky(prior.t0))))
    eye = np.broadcast_to(np.eye(d), t.shape)
    tau_mean = s[:, None, None] * np.linalg.solve(t, eye)
    logdet_mean = multivariate_digamma(d, 0.5 * s) + d * np.log(2.0) - logdet_t
    kl_w = (
        0.5 * s * logdet_t
        - 0.5 * prior.s0 * logdet_t0
        - 0.5 * (s - prior.s0) * d * np.log(2.0)
        - multivariate_log_gamma(d, 0.5 * s)
        + multivariate_log_gamma(d, 0.5 * prior.s0)
        + 0.5 * (s - prior.s0) * logdet_mean
        - 0.5 * (s * d - np.einsum("de,jde->j", prior.t0, tau_mean))
    )
    p = state.u * state.v - state.w**2
    p_0 = prior.u0 * prior.v0 - prior.w0**2
    dm = state.m - prior.m0
    dn = state.n - prior.n0
    quad = (
        prior.u0 * np.einsum("jd,jde,je->j", dm, tau_mean, dm)
        + 2.0 * prior.w0 * np.einsum("jd,jde,je->j", dm, tau_mean, dn)
        + prior.v0 * np.einsum("jd,jde,je->j", dn, tau_mean, dn)
    )
    trace_term = (prior.u0 * state.v - 2.0 * prior.w0 * state.w + prior.v0 * state.u) / p
    kl_n = 0.5 * (d * trace_term - 2.0 * d + quad + d * np.log(p / p_0))
    return float(np.sum(kl_w + kl_n))


def elbo(log_rho_rowsums, state, prior, trun_prior=None):
    """Data term minus the parameter-posterior KL, evaluated after an E-step."""
    if state.concentration == "dpm":
        kl = _beta_kl_sum(state.l, state.r, prior.l0, prior.r0)
    else:
        kl = _dirichlet_kl(state.l, prior.l0)
    if state.variant == "trun":
        if trun_prior is None:
            raise ValueError("trun variant requires the truncated-normal prior")
        loc0, prec0 = trun_prior
        kl += float(np.sum(dist.truncated_normal_kl(state.f, state.g, loc0, prec0)))
    else:
        kl += _lambda_kl_sum(state, prior)
    kl += _normal_wishart_kl_sum(state, prior)
    return float(np.sum(log_rho_rowsums) - kl)


# ---------------------------------------------------------------------------
# Pruning and the driver
# ---------------------------------------------------------------------------


def prune(state, hm, stats, eps_z):
    """Drop clusters whose effective count fell below eps_z.

    Cluster order is preserved (the stick-breaking updates depend on it)
    and responsibility rows are renormalized.
    """
    keep = stats.zstar >= eps_z
    if np.all(keep):
        return state, hm
    if not np.any(keep):
        raise DegenerateFitError(
            f"all clusters fell below the pruning threshold {eps_z}"
        )
    zbar = hm.zbar[:, keep]
    zbar = zbar / zbar.sum(axis=1, keepdims=True)
    new_hm = HiddenMoments(zbar=zbar, ybar=hm.ybar[:, keep], yhat=hm.yhat[:, keep])
    return state.take(keep), new_hm


def _trun_lambda_prior(pconfig):
    # reciprocal-mean parameterization: center the prior at 1 so the mixing
    # scalar has unit prior mean, with nu_lambda as the precision
    return 1.0, pconfig.nu_lambda


def fit(data, pconfig, fconfig):
    """Full VB fit; deterministic given the seed in fconfig."""
    if fconfig.variant == "gmm":
        from .baseline_gmm import gmm_fit

        return gmm_fit(data, pconfig, fconfig)

    family = "gamma" if fconfig.variant == "gam" else "inverse_gaussian"
    prior = build_prior(pconfig.with_family(family), data.mean, data.cov)
    trun_prior = _trun_lambda_prior(pconfig) if fconfig.variant == "trun" else None

    rng = np.random.default_rng(fconfig.seed)
    hm = kmeans_init(data, fconfig.m0, rng)
    stats = accumulate_stats(data, hm)

    n = data.n_points
    tol = fconfig.eps_dl_coeff * n
    trace = []
    prev_elbo = None
    streak = 0
    converged = False
    iterations = 0
    for iterations in range(1, fconfig.max_iter + 1):
        state = m_step(
            stats,
            prior,
            fconfig.variant,
            fconfig.concentration,
            alt_lambda_update=fconfig.alt_lambda_update,
            trun_prior=trun_prior,
        )
        hm, rowsums = e_step(data, state)
        bound = elbo(rowsums, state, prior, trun_prior=trun_prior)
        trace.append(bound)

        stats = accumulate_stats(data, hm)
        m_before = state.n_clusters
        state, hm = prune(state, hm, stats, fconfig.eps_z)
        if state.n_clusters < m_before:
            stats = accumulate_stats(data, hm)
            streak = 0  # the bound jumps when clusters are removed
        elif prev_elbo is not None:
            streak = streak + 1 if abs(bound - prev_elbo) < tol else 0
            if streak >= fconfig.patience:
                converged = True
        prev_elbo = bound
        if converged:
            break

    labels = np.argmax(hm.zbar, axis=1)
    return FitResult(
        labels=labels,
        zbar=hm.zbar,
        elbo_trace=np.asarray(trace),
        n_clusters=state.n_clusters,
        state=state,
        converged=converged,
        iterations=iterations,
    )
