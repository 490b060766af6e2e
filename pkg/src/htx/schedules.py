"""Diffusion-time geometry: noise schedules and guidance weight schedules.

A noise schedule fixes the forward marginal x_t = alpha_t x_0 + sigma_t eps
through the coefficient pair (alpha_t, sigma_t) on the clamped time interval
[t_min, t_max]:

  vp:    alpha_t = exp(-t^2 (beta_max - beta_min) / 4 - t beta_min / 2),
         sigma_t = sqrt(1 - alpha_t^2),  with beta(t) = beta_min + t (beta_max - beta_min)
  otfm:  alpha_t = 1 - t,  sigma_t = t

Both families satisfy alpha decreasing, sigma increasing, alpha -> 1 and
sigma -> 0 as t -> 0.  The SDE coefficients follow from the pair:

  f(x, t) = (alpha'_t / alpha_t) x
  g^2(t)  = 2 sigma_t sigma'_t - 2 (alpha'_t / alpha_t) sigma_t^2

which reduces to g^2 = beta(t) for vp and g^2 = 2t / (1 - t) for otfm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TimeRangeError

VP = "vp"
OTFM = "otfm"

POWER_OF_SIGMA = "power_of_sigma"
POWER_OF_TIME = "power_of_time"
CONSTANT = "constant"

_RANGE_SLACK = 1e-12  # absorbs float drift on time grids


@dataclass(frozen=True)
class NoiseSchedule:
    """Coefficient pair (alpha_t, sigma_t) with its drift and diffusion."""

    kind: str
    beta_min: float = 0.1
    beta_max: float = 20.0
    horizon: float = 1.0
    t_min: float = 1e-3
    t_max: float = 1.0

    def __post_init__(self):
        if self.kind not in (VP, OTFM):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == VP and not 0.0 < self.beta_min < self.beta_max:
            raise ConfigError("vp schedule needs 0 < beta_min < beta_max")
        if not 0.0 < self.t_min < self.t_max <= self.horizon:
            raise ConfigError("need 0 < t_min < t_max <= horizon")
        if self.kind == OTFM and self.t_max >= 1.0:
            raise ConfigError("otfm needs t_max < 1 (alpha vanishes at t = 1)")

    @classmethod
    def vp(cls, beta_min: float = 0.1, beta_max: float = 20.0,
           t_min: float = 1e-3, t_max: float = 1.0) -> "NoiseSchedule":
        return cls(VP, beta_min=beta_min, beta_max=beta_max, t_min=t_min, t_max=t_max)

    @classmethod
    def otfm(cls, t_min: float = 1e-3, t_max: float = 1.0 - 1e-3) -> "NoiseSchedule":
        return cls(OTFM, t_min=t_min, t_max=t_max)

    def _check_t(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_min - _RANGE_SLACK) or np.any(t > self.t_max + _RANGE_SLACK):
            raise TimeRangeError(
                f"t outside [{self.t_min}, {self.t_max}] for {self.kind} schedule"
            )
        return t if t.ndim else float(t)

    def beta(self, t):
        """Instantaneous vp rate beta(t); linear in t."""
        if self.kind != VP:
            raise ConfigError("beta(t) is defined for the vp schedule only")
        return self.beta_min + t * (self.beta_max - self.beta_min)

    def alpha_sigma(self, t):
        """Return (alpha_t, sigma_t); accepts scalar or array t."""
        t = self._check_t(t)
        if self.kind == VP:
            a = np.exp(-0.25 * t * t * (self.beta_max - self.beta_min)
                       - 0.5 * t * self.beta_min)
            return a, np.sqrt(1.0 - a * a)
        return 1.0 - t, t

    def log_alpha_dot(self, t):
        """d(log alpha_t)/dt, the per-coordinate drift rate."""
        t = self._check_t(t)
        if self.kind == VP:
            return -0.5 * self.beta(t)
        return -1.0 / (1.0 - t)

    def sigma_dot(self, t):
        """d(sigma_t)/dt."""
        t = self._check_t(t)
        if self.kind == VP:
            a, s = self.alpha_sigma(t)
            # sigma^2 = 1 - alpha^2  =>  sigma' = -alpha alpha' / sigma
            return -a * (a * self.log_alpha_dot(t)) / s
        return np.ones_like(t) if isinstance(t, np.ndarray) else 1.0

    def drift_f(self, x, t):
        """Forward drift f(x, t) = (alpha'_t / alpha_t) x."""
        return self.log_alpha_dot(t) * np.asarray(x, dtype=float)

    def diffusion_g2(self, t):
        """Squared diffusion g^2(t) = 2 sigma sigma' - 2 (alpha'/alpha) sigma^2."""
        _, s = self.alpha_sigma(t)
        return 2.0 * s * self.sigma_dot(t) - 2.0 * self.log_alpha_dot(t) * s * s


@dataclass(frozen=True)
class WeightSchedule:
    """Guidance weight lambda in [0, 1] as a function of noise level or time.

    Families:
      power_of_sigma: lambda = sigma^a      (default; decays as sampling denoises)
      power_of_time:  lambda = (t / T)^a
      constant:       lambda = c            (c = 0 unguided, c = 1 fully pinned)
    """

    family: str
    exponent: float = 5.0
    constant: float = 1.0

    def __post_init__(self):
        if self.family not in (POWER_OF_SIGMA, POWER_OF_TIME, CONSTANT):
            raise ConfigError(f"unknown weight family {self.family!r}")
        if self.exponent < 0:
            raise ConfigError("weight exponent must be >= 0")
        if not 0.0 <= self.constant <= 1.0:
            raise ConfigError("constant weight must lie in [0, 1]")

    def weight(self, sigma, t, horizon: float = 1.0):
        """Evaluate lambda; power_of_sigma ignores t, power_of_time ignores sigma."""
        return self.weight_with_exponent(sigma, t, horizon, self.exponent)

    def weight_with_exponent(self, sigma, t, horizon: float, exponent):
        """Evaluate lambda with an explicit (possibly per-coordinate) exponent."""
        if np.any(np.asarray(exponent) < 0):
            raise ConfigError("weight exponent must be >= 0")
        if self.family == CONSTANT:
            return self.constant
        if self.family == POWER_OF_SIGMA:
            if np.any(sigma < 0) or np.any(sigma > 1 + _RANGE_SLACK):
                raise ValueError("sigma outside [0, 1]")
            base = sigma
        else:
            if np.any(t < 0) or np.any(t > horizon + _RANGE_SLACK):
                raise ValueError("t outside [0, horizon]")
            base = t / horizon
        return np.clip(base ** exponent, 0.0, 1.0)
