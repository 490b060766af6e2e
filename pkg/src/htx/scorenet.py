"""A small trainable noise-prediction MLP and the parameterization algebra.

The network predicts the forward noise eps from (x_t, alpha_t, sigma_t); the
three standard views of a diffusion model are interchangeable:

  score    s = -eps / sigma_t
  velocity v = f(x, t) - g^2(t) s / 2     (the deterministic sampling drift)

Training minimizes the denoising objective in score-residual form,

  E || -eps_hat / sigma_t  -  (-eps / sigma_t) ||^2,

with x_t = alpha_t x_0 + sigma_t eps and t uniform on [t_min, t_max].  The
plain unweighted noise MSE is available via weighted=False.

Weight file layout (little endian):
  bytes 0..6    magic b"HTXNET1"
  byte  7       uint8 L, the number of layer sizes
  next 4L bytes uint32 layer sizes [input, hidden..., output]
  rest          float64 parameters, alternating row-major W then b per layer
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import oracle
from .errors import ConfigError, SingularityError, TrainingError
from .schedules import NoiseSchedule

_MAGIC = b"HTXNET1"


@dataclass(frozen=True)
class MlpNet:
    """Two-hidden-layer tanh MLP mapping (x, alpha, sigma) -> predicted noise."""

    params: tuple  # (W1, b1, W2, b2, W3, b3)
    dim: int

    @classmethod
    def init(cls, dim: int, hidden: tuple[int, int] = (64, 64),
             rng: np.random.Generator | None = None) -> "MlpNet":
        rng = rng or np.random.default_rng(0)
        sizes = [dim + 2, *hidden, dim]
        params = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            params.append(rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in))
            params.append(np.zeros(fan_out))
        return cls(params=tuple(params), dim=dim)

    @property
    def sizes(self) -> list[int]:
        return [self.params[0].shape[1], *(w.shape[0] for w in self.params[::2])]

    def _features(self, x, t, schedule: NoiseSchedule):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a, s = schedule.alpha_sigma(t)
        cond = np.broadcast_to([a, s], (x.shape[0], 2))
        return np.concatenate([x, cond], axis=1)

    def forward(self, x, t, schedule: NoiseSchedule):
        """Predicted noise at (x, t); x may be (d,) or (n, d)."""
        single = np.asarray(x).ndim == 1
        h = self._features(x, t, schedule)
        w1, b1, w2, b2, w3, b3 = self.params
        h = np.tanh(h @ w1.T + b1)
        h = np.tanh(h @ w2.T + b2)
        out = h @ w3.T + b3
        return out[0] if single else out


def eps_to_score(eps, sigma):
    """s = -eps / sigma."""
    if np.any(np.asarray(sigma) == 0.0):
        raise SingularityError("score undefined at sigma = 0")
    return -np.asarray(eps, dtype=float) / sigma


def score_to_eps(score, sigma):
    """eps = -sigma * s."""
    return -np.asarray(score, dtype=float) * sigma


def score_to_velocity(score, x, t, schedule: NoiseSchedule):
    """Deterministic sampling drift v = f(x, t) - g^2(t) s / 2."""
    return schedule.drift_f(x, t) - 0.5 * schedule.diffusion_g2(t) * np.asarray(score, dtype=float)


def velocity_to_score(v, x, t, schedule: NoiseSchedule):
    """Inverse of score_to_velocity: s = 2 (f - v) / g^2."""
    g2 = schedule.diffusion_g2(t)
    if np.any(np.asarray(g2) == 0.0):
        raise SingularityError("score undefined where g^2 = 0")
    return 2.0 * (schedule.drift_f(x, t) - np.asarray(v, dtype=float)) / g2


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 5000
    batch: int = 256
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        # steps = 0 is permitted as the degenerate no-op run
        if self.steps < 0 or self.batch < 1 or self.learning_rate <= 0:
            raise ConfigError("need steps >= 0, batch >= 1, learning_rate > 0")


def dsm_loss_grad_at(net: MlpNet, x0: np.ndarray, t: np.ndarray, eps: np.ndarray,
                     schedule: NoiseSchedule, weighted: bool = True):
    """Loss and exact parameter gradients for fixed draws (t, eps).

    Separating the stochastic draws from the differentiable computation lets
    finite differences check the gradients on identical inputs.
    """
    a, s = schedule.alpha_sigma(t)
    a = a[:, None]
    s = s[:, None]
    xt = a * x0 + s * eps
    w1, b1, w2, b2, w3, b3 = net.params
    cond = np.concatenate([a, s], axis=1)
    h0 = np.concatenate([xt, cond], axis=1)
    h1 = np.tanh(h0 @ w1.T + b1)
    h2 = np.tanh(h1 @ w2.T + b2)
    pred = h2 @ w3.T + b3

    n = x0.shape[0]
    resid = (pred - eps) / s if weighted else (pred - eps)
    loss = float(np.sum(resid * resid) / n)

    g_out = 2.0 * resid / (s * n) if weighted else 2.0 * resid / n
    g_w3 = g_out.T @ h2
    g_b3 = g_out.sum(axis=0)
    g_h2 = (g_out @ w3) * (1.0 - h2 * h2)
    g_w2 = g_h2.T @ h1
    g_b2 = g_h2.sum(axis=0)
    g_h1 = (g_h2 @ w2) * (1.0 - h1 * h1)
    g_w1 = g_h1.T @ h0
    g_b1 = g_h1.sum(axis=0)
    return loss, (g_w1, g_b1, g_w2, g_b2, g_w3, g_b3)


def dsm_loss_grad(net: MlpNet, batch: np.ndarray, schedule: NoiseSchedule,
                  rng: np.random.Generator, weighted: bool = True):
    """Draw (t, eps) for the batch, then evaluate loss and gradients."""
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[0] < 1:
        raise ValueError("batch must be non-empty")
    t = rng.uniform(schedule.t_min, schedule.t_max, size=batch.shape[0])
    eps = rng.standard_normal(batch.shape)
    return dsm_loss_grad_at(net, batch, t, eps, schedule, weighted)


def train(net: MlpNet, data: np.ndarray, cfg: TrainConfig, schedule: NoiseSchedule,
          weighted: bool = True, eval_fn: Callable[[MlpNet], float] | None = None,
          record_every: int = 100):
    """Adam on the denoising objective; returns (trained net, loss curve).

    The curve has one row per recorded step: (step, loss) plus eval_fn(net)
    when given.  Identical (seed, config, data) reproduces it bitwise.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[0] < cfg.batch:
        raise ValueError("data size must be >= batch size")
    rng = np.random.default_rng(cfg.seed)
    params = [p.copy() for p in net.params]
    moment1 = [np.zeros_like(p) for p in params]
    moment2 = [np.zeros_like(p) for p in params]
    curve = []

    def record(step, loss):
        current = MlpNet(params=tuple(p.copy() for p in params), dim=net.dim)
        row = [float(step), loss]
        if eval_fn is not None:
            row.append(float(eval_fn(current)))
        curve.append(row)

    for step in range(cfg.steps):
        idx = rng.integers(0, data.shape[0], size=cfg.batch)
        current = MlpNet(params=tuple(params), dim=net.dim)
        loss, grads = dsm_loss_grad(current, data[idx], schedule, rng, weighted)
        if not np.isfinite(loss):
            raise TrainingError(step)
        if step % record_every == 0:
            record(step, loss)
        scale1 = 1.0 - cfg.beta1 ** (step + 1)
        scale2 = 1.0 - cfg.beta2 ** (step + 1)
        for i, g in enumerate(grads):
            moment1[i] = cfg.beta1 * moment1[i] + (1.0 - cfg.beta1) * g
            moment2[i] = cfg.beta2 * moment2[i] + (1.0 - cfg.beta2) * g * g
            step_dir = (moment1[i] / scale1) / (np.sqrt(moment2[i] / scale2) + cfg.adam_eps)
            params[i] = params[i] - cfg.learning_rate * step_dir

    trained = MlpNet(params=tuple(params), dim=net.dim)
    if cfg.steps > 0:
        final_rng = np.random.default_rng(cfg.seed + 1)
        loss, _ = dsm_loss_grad(trained, data[: cfg.batch], schedule, final_rng, weighted)
        record(cfg.steps, loss)
    return trained, np.asarray(curve)


def save_weights(net: MlpNet, path):
    """Persist the network in the flat little-endian format described above."""
    sizes = net.sizes
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<B", len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for p in net.params:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_weights(path) -> MlpNet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(_MAGIC)] != _MAGIC:
        raise ConfigError(f"not a weight file: bad magic in {path}")
    off = len(_MAGIC)
    (n_sizes,) = struct.unpack_from("<B", blob, off)
    off += 1
    sizes = struct.unpack_from(f"<{n_sizes}I", blob, off)
    off += 4 * n_sizes
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(blob, dtype="<f8", count=fan_out * fan_in, offset=off)
        off += w.nbytes
        b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=off)
        off += b.nbytes
        params.extend([w.reshape(fan_out, fan_in).copy(), b.copy()])
    return MlpNet(params=tuple(params), dim=sizes[-1])


class ScoreModel:
    """Marginal-score evaluator exposing all three parameterizations."""

    def __init__(self, score_fn: Callable, schedule: NoiseSchedule, dim: int):
        self._score_fn = score_fn
        self.schedule = schedule
        self.dim = dim

    def score(self, x, t):
        return self._score_fn(x, t)

    def epsilon(self, x, t):
        _, s = self.schedule.alpha_sigma(t)
        return score_to_eps(self.score(x, t), s)

    def velocity(self, x, t):
        return score_to_velocity(self.score(x, t), x, t, self.schedule)


def mixture_score_model(gm: oracle.GaussianMixture, schedule: NoiseSchedule) -> ScoreModel:
    """Exact score of the diffused mixture, as a drop-in model."""

    def score_fn(x, t):
        return oracle.gm_score(oracle.gm_pushforward(gm, schedule, t), x)

    return ScoreModel(score_fn, schedule, gm.dim)


def net_score_model(net: MlpNet, schedule: NoiseSchedule) -> ScoreModel:
    """Trained-network score: s = -eps_hat / sigma."""

    def score_fn(x, t):
        _, s = schedule.alpha_sigma(t)
        return eps_to_score(net.forward(x, t, schedule), s)

    return ScoreModel(score_fn, schedule, net.dim)
