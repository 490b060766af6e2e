"""Closed-form ground truth used to test the sampler without any trained model.

Gaussian mixtures are closed under the forward diffusion x_t = alpha x_0 + sigma eps,
so the diffused density, its score, the endpoint-conditioned drift correction,
and the restoration posterior under a linear-Gaussian degradation are all exact.

All mixture evaluations run in log space (log-sum-exp) so responsibilities never
underflow for finite inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import ConfigError, DegeneratePosteriorError, SingularityError
from .schedules import NoiseSchedule

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GaussianMixture:
    """Weighted sum of Gaussians; weights sum to 1, covariances SPD."""

    weights: np.ndarray  # (K,)
    means: np.ndarray    # (K, d)
    covs: np.ndarray     # (K, d, d)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        m = np.atleast_2d(np.asarray(self.means, dtype=float))
        c = np.asarray(self.covs, dtype=float)
        if c.ndim == 2:
            c = c[None]
        if w.ndim != 1 or m.shape[0] != w.shape[0] or c.shape[:2] != (w.shape[0], m.shape[1]):
            raise ValueError("inconsistent mixture shapes")
        if np.any(w <= 0):
            raise ValueError("mixture weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        if not np.allclose(c, np.swapaxes(c, 1, 2), atol=1e-12):
            raise ValueError("covariances must be symmetric")
        try:
            chols = np.linalg.cholesky(c)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariances must be positive definite") from exc
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covs", c)
        object.__setattr__(self, "_chols", chols)
        object.__setattr__(self, "_log_weights", np.log(w))

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def covariance(self) -> np.ndarray:
        mu = self.mean()
        second = np.einsum("k,kij->ij", self.weights, self.covs)
        second += np.einsum("k,ki,kj->ij", self.weights, self.means, self.means)
        return second - np.outer(mu, mu)


def _as_batch(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise ValueError(f"expected trailing dimension {dim}, got {x.shape}")
    if x.ndim == 1:
        return x[None], True
    return x, False


def _component_logpdfs(gm: GaussianMixture, xs: np.ndarray) -> np.ndarray:
    """Per-component log N(x; mu_k, Sigma_k) for xs of shape (n, d) -> (n, K)."""
    n, d = xs.shape
    out = np.empty((n, gm.n_components))
    for k in range(gm.n_components):
        chol = gm._chols[k]
        z = solve_triangular(chol, (xs - gm.means[k]).T, lower=True)
        log_det = np.sum(np.log(np.diag(chol)))
        out[:, k] = -0.5 * d * _LOG_2PI - log_det - 0.5 * np.sum(z * z, axis=0)
    return out


def gm_sample(gm: GaussianMixture, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. points: component by weight, then a Gaussian draw."""
    if n < 1:
        raise ValueError("n must be >= 1")
    idx = rng.choice(gm.n_components, size=n, p=gm.weights)
    z = rng.standard_normal((n, gm.dim))
    return gm.means[idx] + np.einsum("nij,nj->ni", gm._chols[idx], z)


def gm_pushforward(gm: GaussianMixture, schedule: NoiseSchedule, t) -> GaussianMixture:
    """Mixture of x_t = alpha x_0 + sigma eps: means alpha mu_k, covs alpha^2 Sigma_k + sigma^2 I."""
    a, s = schedule.alpha_sigma(t)
    eye = np.eye(gm.dim)
    return GaussianMixture(gm.weights, a * gm.means, a * a * gm.covs + s * s * eye)


def gm_logpdf(gm: GaussianMixture, x):
    """Exact mixture log density at x; x may be (d,) or (n, d)."""
    xs, single = _as_batch(x, gm.dim)
    lp = logsumexp(_component_logpdfs(gm, xs) + gm._log_weights, axis=1)
    return float(lp[0]) if single else lp


def gm_score(gm: GaussianMixture, x):
    """Gradient of gm_logpdf: sum_k r_k(x) Sigma_k^{-1} (mu_k - x)."""
    xs, single = _as_batch(x, gm.dim)
    logs = _component_logpdfs(gm, xs) + gm._log_weights
    resp = np.exp(logs - logsumexp(logs, axis=1, keepdims=True))
    score = np.zeros_like(xs)
    for k in range(gm.n_components):
        chol = gm._chols[k]
        half = solve_triangular(chol, (gm.means[k] - xs).T, lower=True)
        comp = solve_triangular(chol.T, half, lower=False).T
        score += resp[:, k, None] * comp
    return score[0] if single else score


def conditional_score(x, x0, schedule: NoiseSchedule, t):
    """Score of the forward kernel N(x; alpha x0, sigma^2 I): (alpha x0 - x) / sigma^2."""
    a, s = schedule.alpha_sigma(t)
    if np.any(s == 0.0):
        raise SingularityError("conditional score undefined at sigma = 0")
    return (a * np.asarray(x0, dtype=float) - np.asarray(x, dtype=float)) / (s * s)


def exact_h(x, y, gm: GaussianMixture, schedule: NoiseSchedule, t):
    """Endpoint-conditioned drift correction grad log p(x_0 = y | x_t).

    By Bayes' rule this is the kernel score minus the marginal score; it is
    tractable here because the diffused mixture density is analytic.
    """
    return conditional_score(x, y, schedule, t) - gm_score(gm_pushforward(gm, schedule, t), x)


# ---------------------------------------------------------------------------
# Linear degradations and their conjugate posterior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DegradationOperator:
    """Linear forward map ym = A y + noise, with a lift back to data space.

    `lift` maps the m-dimensional measurement to d dimensions so the coarse
    sample can drive guidance; `valid` flags coordinates that carry measured
    information (False marks fill-in produced by the lift).
    """

    matrix: np.ndarray     # (m, d)
    noise_std: float
    lift_matrix: np.ndarray  # (d, m)
    valid: np.ndarray      # (d,) bool

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        lift = np.atleast_2d(np.asarray(self.lift_matrix, dtype=float))
        valid = np.asarray(self.valid, dtype=bool)
        m, d = a.shape
        if lift.shape != (d, m) or valid.shape != (d,):
            raise ValueError("inconsistent operator shapes")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        zero_rows = ~np.any(a != 0.0, axis=1)
        if np.any(zero_rows):
            # all-zero output rows are only legal when they are flagged masked-out
            if m != d or np.any(valid[zero_rows]):
                raise ValueError("all-zero operator row without a masked flag")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "lift_matrix", lift)
        object.__setattr__(self, "valid", valid)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def measurement_dim(self) -> int:
        return self.matrix.shape[0]

    def measure(self, y, rng: np.random.Generator | None = None):
        """Apply A y + noise_std * z; y may be (d,) or (n, d)."""
        y = np.asarray(y, dtype=float)
        meas = y @ self.matrix.T
        if self.noise_std > 0:
            if rng is None:
                raise ValueError("rng required when noise_std > 0")
            meas = meas + self.noise_std * rng.standard_normal(meas.shape)
        return meas

    def lift(self, measurement):
        """Map a measurement back to data space."""
        return np.asarray(measurement, dtype=float) @ self.lift_matrix.T


@dataclass(frozen=True)
class PairedSample:
    """A fine sample with its lifted coarse counterpart.

    `measurement` keeps the raw m-dimensional observation so the conjugate
    posterior can condition on exactly what was measured.
    """

    fine: np.ndarray
    coarse: np.ndarray
    valid: np.ndarray
    measurement: np.ndarray


def degrade(op: DegradationOperator, y, rng: np.random.Generator) -> PairedSample:
    """Produce the coarse sample lift(A y + noise) with its validity mask."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != op.dim:
        raise ValueError(f"expected trailing dimension {op.dim}, got {y.shape}")
    meas = op.measure(y, rng)
    return PairedSample(fine=y, coarse=op.lift(meas), valid=op.valid.copy(), measurement=meas)


def identity_operator(dim: int, noise_std: float = 0.0) -> DegradationOperator:
    eye = np.eye(dim)
    return DegradationOperator(eye, noise_std, eye, np.ones(dim, dtype=bool))


def shrink(factor: float, dim: int, noise_std: float = 0.0) -> DegradationOperator:
    if factor <= 0:
        raise ConfigError("shrink factor must be positive")
    return DegradationOperator(factor * np.eye(dim), noise_std,
                               np.eye(dim), np.ones(dim, dtype=bool))


def blur_1d(kernel_std: float, grid_size: int, noise_std: float = 0.0) -> DegradationOperator:
    """Circular-free Gaussian blur on a 1-d grid; rows renormalized to sum 1."""
    if kernel_std <= 0 or grid_size < 1:
        raise ConfigError("blur needs kernel_std > 0 and grid_size >= 1")
    idx = np.arange(grid_size)
    a = np.exp(-0.5 * ((idx[:, None] - idx[None, :]) / kernel_std) ** 2)
    a /= a.sum(axis=1, keepdims=True)
    return DegradationOperator(a, noise_std, np.eye(grid_size),
                               np.ones(grid_size, dtype=bool))


def downsample(factor: int, grid_size: int, noise_std: float = 0.0) -> DegradationOperator:
    """Average `factor` adjacent cells; lift replicates each cell back out."""
    if factor < 1 or grid_size < 1 or grid_size % factor != 0:
        raise ConfigError("downsample needs factor >= 1 dividing grid_size")
    m = grid_size // factor
    a = np.zeros((m, grid_size))
    lift = np.zeros((grid_size, m))
    for i in range(m):
        a[i, i * factor:(i + 1) * factor] = 1.0 / factor
        lift[i * factor:(i + 1) * factor, i] = 1.0
    return DegradationOperator(a, noise_std, lift, np.ones(grid_size, dtype=bool))


def mask(indices, dim: int, noise_std: float = 0.0) -> DegradationOperator:
    """Erase the given coordinates; the lift fills each with its nearest kept one."""
    erased = np.zeros(dim, dtype=bool)
    erased[np.asarray(list(indices), dtype=int)] = True
    if erased.all():
        raise ConfigError("mask cannot erase every coordinate")
    a = np.eye(dim)
    a[erased] = 0.0
    kept = np.flatnonzero(~erased)
    lift = np.zeros((dim, dim))
    for j in range(dim):
        src = j if not erased[j] else kept[np.argmin(np.abs(kept - j))]
        lift[j, src] = 1.0
    return DegradationOperator(a, noise_std, lift, ~erased)


def linear_gaussian_posterior(gm: GaussianMixture, op: DegradationOperator,
                              measurement) -> GaussianMixture:
    """Exact posterior p(y | measurement) for a mixture prior and Gaussian noise.

    Each component gets the conjugate (Kalman) update; weights are reweighted
    by the component marginal likelihood of the measurement.  The covariance
    update uses the Joseph form to stay positive definite.
    """
    if op.noise_std <= 0:
        raise DegeneratePosteriorError("posterior needs noise_std > 0")
    ym = np.asarray(measurement, dtype=float)
    a = op.matrix
    m = op.measurement_dim
    s2 = op.noise_std ** 2
    eye_m = np.eye(m)
    eye_d = np.eye(op.dim)

    log_w = np.empty(gm.n_components)
    means = np.empty_like(gm.means)
    covs = np.empty_like(gm.covs)
    for k in range(gm.n_components):
        innovation_cov = a @ gm.covs[k] @ a.T + s2 * eye_m
        chol = np.linalg.cholesky(innovation_cov)
        resid = ym - a @ gm.means[k]
        z = solve_triangular(chol, resid, lower=True)
        log_w[k] = (gm._log_weights[k] - 0.5 * m * _LOG_2PI
                    - np.sum(np.log(np.diag(chol))) - 0.5 * z @ z)
        gain_t = solve_triangular(chol.T, solve_triangular(chol, a @ gm.covs[k], lower=True),
                                  lower=False)
        gain = gain_t.T  # (d, m)
        means[k] = gm.means[k] + gain @ resid
        shrinkage = eye_d - gain @ a
        cov = shrinkage @ gm.covs[k] @ shrinkage.T + s2 * (gain @ gain.T)
        covs[k] = 0.5 * (cov + cov.T)
    weights = np.exp(log_w - logsumexp(log_w))
    weights /= weights.sum()
    return GaussianMixture(weights, means, covs)
