"""Euler integrators for the guided dynamics, with trajectory recording.

Time runs backwards from `start` (near full noise) to `end` (near data) on a
uniform grid.  The deterministic update is

  x_{t - dt} = x_t - drift(x_t, t) dt,

and the stochastic one adds g(t) sqrt(dt) z with z standard normal.  Ensembles
integrate many trajectories as one batched state; each trajectory owns a
private random stream spawned from (seed, index), so the batched result is
identical to integrating each trajectory alone with its own stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError
from .guidance import GuidedDrift
from .schedules import NoiseSchedule
from .scorenet import ScoreModel

EULER_ODE = "euler_ode"
EULER_MARUYAMA = "euler_maruyama"


@dataclass(frozen=True)
class SamplerConfig:
    steps: int
    start: float = 1.0
    end: float = 1e-3
    solver: str = EULER_ODE
    seed: int = 0
    record_every: int = 0  # 0 records endpoints only

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if not self.start > self.end:
            raise ConfigError("start time must exceed end time")
        if self.solver not in (EULER_ODE, EULER_MARUYAMA):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.record_every < 0:
            raise ConfigError("record_every must be >= 0")


@dataclass(frozen=True)
class Trajectory:
    """Recorded sampling path; times strictly decrease and end at the endpoint."""

    times: np.ndarray
    states: np.ndarray  # (n_recorded, d)
    endpoint: np.ndarray
    seed: int


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Private stream for trajectory/trial `index`, split from the base seed."""
    return np.random.default_rng(np.random.SeedSequence((seed, index)))


def _record_indices(cfg: SamplerConfig) -> np.ndarray:
    if cfg.record_every == 0:
        return np.array([0, cfg.steps])
    idx = list(range(0, cfg.steps + 1, cfg.record_every))
    if idx[-1] != cfg.steps:
        idx.append(cfg.steps)
    return np.asarray(idx)


def _integrate(drift_fn, cfg: SamplerConfig, x0: np.ndarray,
               noise_scale_fn=None, noise_block: np.ndarray | None = None):
    """Shared Euler loop; x0 is (d,) or (n, d), noise_block is (steps, *x0.shape)."""
    times = np.linspace(cfg.start, cfg.end, cfg.steps + 1)
    rec_idx = _record_indices(cfg)
    rec_states = np.empty((len(rec_idx),) + x0.shape)
    rec_pos = {int(k): i for i, k in enumerate(rec_idx)}

    x = np.array(x0, dtype=float)
    if 0 in rec_pos:
        rec_states[rec_pos[0]] = x
    for k in range(cfg.steps):
        t = times[k]
        dt = times[k] - times[k + 1]
        x = x - drift_fn(x, t) * dt
        if noise_block is not None:
            x = x + noise_scale_fn(t) * np.sqrt(dt) * noise_block[k]
        if not np.all(np.isfinite(x)):
            raise DivergenceError(k)
        if (k + 1) in rec_pos:
            rec_states[rec_pos[k + 1]] = x
    return times[rec_idx], rec_states, x


def sample_ode(drift: GuidedDrift, cfg: SamplerConfig, x_start=None,
               rng: np.random.Generator | None = None) -> Trajectory:
    """Deterministic reverse-time Euler run; draws x ~ N(0, I) if no start given."""
    if cfg.solver != EULER_ODE:
        raise ConfigError("sample_ode requires the euler_ode solver")
    if x_start is None:
        rng = rng or np.random.default_rng(cfg.seed)
        x_start = rng.standard_normal(drift.dim)
    times, states, endpoint = _integrate(drift, cfg, np.asarray(x_start, dtype=float))
    return Trajectory(times=times, states=states, endpoint=endpoint, seed=cfg.seed)


def sample_sde(model: ScoreModel, h_term, schedule: NoiseSchedule,
               cfg: SamplerConfig, rng: np.random.Generator | None = None,
               x_start=None) -> Trajectory:
    """Euler-Maruyama run of the reverse SDE, optionally with a correction term.

    Update: x_{t-dt} = x_t - [f - g^2 (s + h)] dt + g sqrt(dt) z.
    """
    if cfg.solver != EULER_MARUYAMA:
        raise ConfigError("sample_sde requires the euler_maruyama solver")
    rng = rng or np.random.default_rng(cfg.seed)
    if x_start is None:
        x_start = rng.standard_normal(model.dim)
    x_start = np.asarray(x_start, dtype=float)
    noise = rng.standard_normal((cfg.steps,) + x_start.shape)

    def drift_fn(x, t):
        correction = model.score(x, t)
        if h_term is not None:
            correction = correction + h_term(x, t)
        return schedule.drift_f(x, t) - schedule.diffusion_g2(t) * correction

    def noise_scale(t):
        return np.sqrt(schedule.diffusion_g2(t))

    times, states, endpoint = _integrate(drift_fn, cfg, x_start,
                                         noise_scale_fn=noise_scale, noise_block=noise)
    return Trajectory(times=times, states=states, endpoint=endpoint, seed=cfg.seed)


def _split(times, states, n, seed):
    return [Trajectory(times=times, states=states[:, i, :],
                       endpoint=states[-1, i, :], seed=seed) for i in range(n)]


def ode_ensemble(drift: GuidedDrift, cfg: SamplerConfig, n: int,
                 start_fn=None) -> list[Trajectory]:
    """n deterministic trajectories integrated as one batch.

    Starts come from per-trajectory streams: start_fn(rng) when given, else
    standard normal draws.
    """
    starts = np.empty((n, drift.dim))
    for i in range(n):
        rng = trial_rng(cfg.seed, i)
        starts[i] = rng.standard_normal(drift.dim) if start_fn is None else start_fn(rng)
    times, states, _ = _integrate(drift, cfg, starts)
    return _split(times, states, n, cfg.seed)


def sde_ensemble(model: ScoreModel, h_term, schedule: NoiseSchedule,
                 cfg: SamplerConfig, n: int, start_fn=None,
                 chunk: int = 2000) -> list[Trajectory]:
    """n stochastic trajectories, chunked to bound the pre-drawn noise memory."""

    def drift_fn(x, t):
        correction = model.score(x, t)
        if h_term is not None:
            correction = correction + h_term(x, t)
        return schedule.drift_f(x, t) - schedule.diffusion_g2(t) * correction

    def noise_scale(t):
        return np.sqrt(schedule.diffusion_g2(t))

    out: list[Trajectory] = []
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        m = hi - lo
        starts = np.empty((m, model.dim))
        noise = np.empty((cfg.steps, m, model.dim))
        for i in range(m):
            rng = trial_rng(cfg.seed, lo + i)
            starts[i] = rng.standard_normal(model.dim) if start_fn is None else start_fn(rng)
            noise[:, i, :] = rng.standard_normal((cfg.steps, model.dim))
        times, states, _ = _integrate(drift_fn, cfg, starts,
                                      noise_scale_fn=noise_scale, noise_block=noise)
        out.extend(_split(times, states, m, cfg.seed))
    return out


def marginal_stats(trajectories: list[Trajectory], t: float):
    """Sample mean and covariance of the recorded states at time t."""
    times = trajectories[0].times
    hits = np.flatnonzero(np.isclose(times, t, rtol=0.0, atol=1e-9))
    if hits.size == 0:
        raise KeyError(f"time {t} was not recorded")
    k = int(hits[0])
    states = np.stack([traj.states[k] for traj in trajectories])
    mean = states.mean(axis=0)
    if states.shape[0] == 1:
        cov = np.zeros((states.shape[1], states.shape[1]))
    else:
        centered = states - mean
        cov = centered.T @ centered / (states.shape[0] - 1)
    return mean, cov
