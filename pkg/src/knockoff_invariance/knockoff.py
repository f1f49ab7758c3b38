"""Second-order Gaussian knockoffs and a Gaussian-mixture extension.

For ``Z ~ N(mu, Sigma)`` and a diagonal ``S`` with ``0 <= S <= 2 Sigma``,
a knockoff row is drawn from

    Z~ | Z = z  ~  N(mu + A (z - mu), V),   A = I - S Sigma^-1,   V = 2S - S Sigma^-1 S,

which makes ``(Z, Z~)`` jointly Gaussian with ``Cov(Z~) = Sigma`` and
``Cov(Z, Z~) = Sigma - S``. ``S`` is the equicorrelated choice, the
largest multiple of the correlation-scale identity that keeps ``2 Sigma - S``
positive definite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import DataError, MultivariateTimeSeries, _as_seed

__all__ = [
    "KnockoffError",
    "GaussianComponent",
    "KnockoffModel",
    "ExchangeabilityReport",
    "EQUICORRELATED_SLACK",
    "compute_equicorrelated_s",
    "fit_gaussian",
    "fit_gmm",
    "sample_knockoffs",
    "sample_gmm_knockoffs",
    "diagnose_exchangeability",
]

logger = logging.getLogger(__name__)

EQUICORRELATED_SLACK = 1e-6
RIDGE_FACTOR = 1e-6
MIN_EIGENVALUE = 1e-8
JITTER_START, JITTER_MAX = 1e-8, 1e-4


class KnockoffError(DataError):
    pass


@dataclass(frozen=True)
class GaussianComponent:
    """Parameters of one Gaussian and its knockoff conditional."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray
    s: np.ndarray  # diagonal of S
    a: np.ndarray  # conditional mean factor I - S Sigma^-1
    v: np.ndarray  # conditional covariance 2S - S Sigma^-1 S
    v_chol: np.ndarray
    v_min_eig: float  # smallest eigenvalue of V before any jitter

    @property
    def s_matrix(self) -> np.ndarray:
        return np.diag(self.s)

    @classmethod
    def build(cls, weight: float, mean, cov) -> "GaussianComponent":
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        s = np.diag(compute_equicorrelated_s(cov)).copy()
        # S Sigma^-1 via a solve; Sigma is symmetric so (Sigma^-1 S)^T = S Sigma^-1
        sinv_s = np.linalg.solve(cov, np.diag(s))
        s_sigma_inv = sinv_s.T
        a = np.eye(len(s)) - s_sigma_inv
        v = 2.0 * np.diag(s) - s_sigma_inv @ np.diag(s)
        v = 0.5 * (v + v.T)
        v_min = float(np.linalg.eigvalsh(v)[0])
        return cls(float(weight), mean, cov, s, a, v, _jittered_cholesky(v), v_min)


@dataclass(frozen=True)
class KnockoffModel:
    """Fitted knockoff sampler.

    ``mean``/``cov``/``s``/``a``/``v`` describe the overall Gaussian fit.
    ``components`` is non-empty for mixture models, whose overall moments
    are those of the mixture.
    """

    gaussian: GaussianComponent
    components: tuple[GaussianComponent, ...] = ()
    log_likelihood: float = float("nan")
    n_iter: int = 0

    @property
    def dim(self) -> int:
        return len(self.gaussian.mean)

    @property
    def mean(self):
        return self.gaussian.mean

    @property
    def cov(self):
        return self.gaussian.cov

    @property
    def s(self):
        return self.gaussian.s

    @property
    def a(self):
        return self.gaussian.a

    @property
    def v(self):
        return self.gaussian.v

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])


def _jittered_cholesky(v: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(v)
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START
    eye = np.eye(len(v))
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            chol = np.linalg.cholesky(v + jitter * eye)
            logger.debug("knockoff covariance needed jitter %g", jitter)
            return chol
        except np.linalg.LinAlgError:
            jitter *= 10
    raise KnockoffError("knockoff conditional covariance is not positive definite "
                        f"even with jitter {JITTER_MAX:g}")


def compute_equicorrelated_s(cov) -> np.ndarray:
    """Equicorrelated diagonal ``S`` for covariance ``cov``.

    On the correlation scale ``s = min(1, 2 * lambda_min) * (1 - 1e-6)``;
    the result is mapped back as ``D^1/2 (s I) D^1/2`` with ``D = diag(cov)``.

    >>> s = compute_equicorrelated_s(np.array([[1.0, 0.8], [0.8, 1.0]]))
    >>> round(float(s[0, 0]), 10)
    0.3999996
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
        raise KnockoffError("covariance must be a symmetric square matrix")
    d = np.diag(cov)
    if np.any(d <= 0):
        raise KnockoffError("covariance is not positive definite (non-positive variance)")
    scale = 1.0 / np.sqrt(d)
    corr = cov * scale[:, None] * scale[None, :]
    lam_min = float(np.linalg.eigvalsh(corr)[0])
    if lam_min <= 0:
        raise KnockoffError(f"covariance is not positive definite (lambda_min={lam_min:.3g})")
    s = min(1.0, 2.0 * lam_min) * (1.0 - EQUICORRELATED_SLACK)
    return np.diag(s * d)


def _regularized_cov(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    n = cov.shape[0]
    if np.linalg.eigvalsh(cov)[0] < MIN_EIGENVALUE:
        ridge = RIDGE_FACTOR * np.trace(cov) / n
        cov = cov + ridge * np.eye(n)
        if np.linalg.eigvalsh(cov)[0] <= 0:
            raise KnockoffError("covariance is singular even after ridge regularization")
    return cov


def _values(series) -> np.ndarray:
    if isinstance(series, MultivariateTimeSeries):
        return series.values
    return np.atleast_2d(np.asarray(series, dtype=float))


def fit_gaussian(series) -> KnockoffModel:
    """Moment-fit a single Gaussian, treating rows as exchangeable samples.

    The covariance is the maximum-likelihood estimate (divisor r); a ridge
    of ``1e-6 * trace / N`` is added when its smallest eigenvalue drops
    below 1e-8.
    """
    x = _values(series)
    r, n = x.shape
    if r <= n:
        raise KnockoffError(f"need more rows than variables to fit a covariance (r={r}, N={n})")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = _regularized_cov(centered.T @ centered / r)
    return KnockoffModel(GaussianComponent.build(1.0, mean, cov))


def _log_gauss(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    chol = np.linalg.cholesky(cov)
    sol = np.linalg.solve(chol, (x - mean).T)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (np.sum(sol * sol, axis=0) + logdet + x.shape[1] * np.log(2 * np.pi))


def fit_gmm(series, n_components: int = 1, seed=0, max_iter: int = 200, tol: float = 1e-6) -> KnockoffModel:
    """Fit a Gaussian mixture by EM and attach per-component knockoff samplers.

    Initialization assigns every row to the nearest of ``n_components``
    randomly chosen rows and takes the moments of each group. EM stops when
    the mean log-likelihood improves by less than ``tol`` or after
    ``max_iter`` iterations. A component whose weight collapses below one
    effective sample is treated as an EM failure.
    """
    if n_components < 1:
        raise KnockoffError(f"number of components must be >= 1, got {n_components}")
    x = _values(series)
    r, n = x.shape
    if r <= n_components * n:
        raise KnockoffError(f"need r > K*N rows (r={r}, K={n_components}, N={n})")
    rng = _as_seed(seed).generator()
    k = n_components

    centers = x[rng.choice(r, size=k, replace=False)]
    dist = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    resp = np.zeros((r, k))
    resp[np.arange(r), dist.argmin(axis=1)] = 1.0

    prev = -np.inf
    ll = -np.inf
    it = 0
    for it in range(1, max_iter + 1):
        # M step
        nk = resp.sum(axis=0)
        if np.any(nk < 1.0):
            raise KnockoffError("EM failure: a mixture component collapsed")
        weights = nk / r
        means = (resp.T @ x) / nk[:, None]
        covs = []
        for c in range(k):
            d = x - means[c]
            covs.append(_regularized_cov((resp[:, c, None] * d).T @ d / nk[c]))
        # E step
        logp = np.column_stack([np.log(weights[c]) + _log_gauss(x, means[c], covs[c]) for c in range(k)])
        norm = logsumexp(logp, axis=1)
        resp = np.exp(logp - norm[:, None])
        ll = float(norm.mean())
        if abs(ll - prev) < tol:
            break
        prev = ll

    components = tuple(GaussianComponent.build(weights[c], means[c], covs[c]) for c in range(k))
    overall_mean = weights @ means
    overall_cov = sum(weights[c] * (covs[c] + np.outer(means[c] - overall_mean, means[c] - overall_mean))
                      for c in range(k))
    overall = GaussianComponent.build(1.0, overall_mean, _regularized_cov(overall_cov))
    return KnockoffModel(overall, components, ll, it)


def _conditional_draw(comp: GaussianComponent, x: np.ndarray, g: np.ndarray) -> np.ndarray:
    return comp.mean + (x - comp.mean) @ comp.a.T + g @ comp.v_chol.T


def sample_knockoffs(model: KnockoffModel, series, seed=0):
    """Draw one knockoff row per input row from the Gaussian conditional.

    Returns the same type as ``series`` (a ``MultivariateTimeSeries`` or an
    array).
    """
    x = _values(series)
    if x.shape[1] != model.dim:
        raise KnockoffError(f"dimension mismatch: series has {x.shape[1]} columns, model {model.dim}")
    g = _as_seed(seed).generator().standard_normal(x.shape)
    out = _conditional_draw(model.gaussian, x, g)
    if isinstance(series, MultivariateTimeSeries):
        return series.with_values(out)
    return out


def sample_gmm_knockoffs(model: KnockoffModel, series, seed=0):
    """Mixture knockoffs: draw each row's component from its posterior,
    then apply that component's Gaussian conditional."""
    if not model.components:
        raise KnockoffError("model has no mixture components; use fit_gmm")
    x = _values(series)
    if x.shape[1] != model.dim:
        raise KnockoffError(f"dimension mismatch: series has {x.shape[1]} columns, model {model.dim}")
    rng = _as_seed(seed).generator()
    comps = model.components
    logp = np.column_stack([np.log(c.weight) + _log_gauss(x, c.mean, c.cov) for c in comps])
    post = np.exp(logp - logsumexp(logp, axis=1)[:, None])
    u = rng.random(len(x))
    labels = np.minimum((np.cumsum(post, axis=1) < u[:, None]).sum(axis=1), len(comps) - 1)
    g = rng.standard_normal(x.shape)
    out = np.empty_like(x)
    for c, comp in enumerate(comps):
        rows = labels == c
        out[rows] = _conditional_draw(comp, x[rows], g[rows])
    if isinstance(series, MultivariateTimeSeries):
        return series.with_values(out)
    return out


@dataclass(frozen=True)
class ExchangeabilityReport:
    """Second-moment check of the swap property, on the correlation scale."""

    knockoff_cov_deviation: float
    cross_cov_deviation: float
    self_cov: np.ndarray
    self_cov_target: np.ndarray
    n_samples: int
    tolerance: float = 0.05
    self_cov_deviation: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "self_cov_deviation",
                           float(np.max(np.abs(self.self_cov - self.self_cov_target))))

    @property
    def flagged(self) -> bool:
        return max(self.knockoff_cov_deviation, self.cross_cov_deviation,
                   self.self_cov_deviation) > self.tolerance

    def table(self) -> str:
        rows = [
            ("samples", f"{self.n_samples}"),
            ("max |Cov(Zk) - Sigma|", f"{self.knockoff_cov_deviation:.4f}"),
            ("max |Cov(Z_i, Zk_j) - Sigma_ij|, i != j", f"{self.cross_cov_deviation:.4f}"),
            ("max |Cov(Z_i, Zk_i) - (Sigma_ii - S_ii)|", f"{self.self_cov_deviation:.4f}"),
        ]
        for i, (got, want) in enumerate(zip(self.self_cov, self.self_cov_target)):
            rows.append((f"Cov(Z_{i + 1}, Zk_{i + 1}) / target", f"{got:.4f} / {want:.4f}"))
        rows.append(("flagged", "yes" if self.flagged else "no"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def diagnose_exchangeability(series, knockoffs, model: KnockoffModel,
                             tolerance: float = 0.05) -> ExchangeabilityReport:
    x, xk = _values(series), _values(knockoffs)
    if x.shape != xk.shape:
        raise KnockoffError(f"shape mismatch: {x.shape} vs {xk.shape}")
    scale = 1.0 / np.sqrt(np.diag(model.cov))
    sigma = model.cov * np.outer(scale, scale)
    s = model.s * scale ** 2
    z = (x - model.mean) * scale
    zk = (xk - model.mean) * scale
    r, n = z.shape
    zc, zkc = z - z.mean(axis=0), zk - zk.mean(axis=0)
    cov_k = zkc.T @ zkc / r
    cross = zc.T @ zkc / r
    off = ~np.eye(n, dtype=bool)
    cross_dev = float(np.max(np.abs(cross - sigma)[off])) if n > 1 else 0.0
    return ExchangeabilityReport(
        knockoff_cov_deviation=float(np.max(np.abs(cov_k - sigma))),
        cross_cov_deviation=cross_dev,
        self_cov=np.diag(cross).copy(),
        self_cov_target=np.diag(sigma) - s,
        n_samples=r,
        tolerance=tolerance,
    )
