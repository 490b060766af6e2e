"""JSON experiment configuration with defaults and a content digest.

A config document has sections `experiment`, `density`, `operator`,
`schedule`, `guidance`, and `sampler`; every field has a default, so the
minimal config is `{"experiment": {"kind": "restore"}}`.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .errors import ConfigError
from .schedules import NoiseSchedule, WeightSchedule
from .solvers import EULER_MARUYAMA, EULER_ODE, SamplerConfig

EXPERIMENT_KINDS = (
    "restore", "ablate_exponent", "ablate_weight_family",
    "baseline_sdedit", "verify", "train_score", "sample_unguided",
)

DEFAULTS = {
    "experiment": {
        "kind": "restore",
        "trials": 200,
        "seed": 0,
        "out": "runs",
        "exponents": [1.0, 3.0, 5.0, 7.0, 9.0],
        "t0_fractions": [0.2, 0.5, 0.8],
    },
    "density": {
        # "mixture": explicit 2-d components; "gaussian_field": smooth 1-d grid prior
        "kind": "mixture",
        "weights": [0.5, 0.5],
        "means": [[-3.0, 0.0], [3.0, 0.0]],
        "variance": 1.0,
        "cells": 16,
        "length_scale": 3.0,
        "jitter": 1e-6,
    },
    "operator": {
        "kind": "blur",
        "kernel_std": 2.0,
        "factor": 2,
        "indices": [0],
        "noise_std": 0.25,
    },
    "schedule": {
        "kind": "vp",
        "beta_min": 0.1,
        "beta_max": 20.0,
        "t_min": 1e-3,
        "t_max": None,  # schedule-dependent default
    },
    "guidance": {
        "family": "power_of_sigma",
        "exponent": 5.0,
        "constant": 1.0,
        "valid_exponent": None,
        "invalid_exponent": None,
        "parameterization": "score",
    },
    "sampler": {
        "steps": 1000,
        "solver": EULER_ODE,
        "record_every": 0,
        "start": None,  # defaults to schedule.t_max
        "end": None,    # defaults to schedule.t_min
    },
}


def _merge_section(name: str, overrides: dict) -> dict:
    base = copy.deepcopy(DEFAULTS[name])
    for key, value in overrides.items():
        if key not in base:
            raise ConfigError(f"unknown key {key!r} in section {name!r}")
        base[key] = value
    return base


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: dict = field(default_factory=dict)
    density: dict = field(default_factory=dict)
    operator: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    guidance: dict = field(default_factory=dict)
    sampler: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        sections = {name: _merge_section(name, doc.get(name, {})) for name in DEFAULTS}
        cfg = cls(**sections)
        if cfg.experiment["kind"] not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {cfg.experiment['kind']!r}")
        if cfg.experiment["trials"] < 1:
            raise ConfigError("trial count must be >= 1")
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "experiment": copy.deepcopy(self.experiment),
            "density": copy.deepcopy(self.density),
            "operator": copy.deepcopy(self.operator),
            "schedule": copy.deepcopy(self.schedule),
            "guidance": copy.deepcopy(self.guidance),
            "sampler": copy.deepcopy(self.sampler),
        }

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def build_schedule(cfg: ExperimentConfig) -> NoiseSchedule:
    sec = cfg.schedule
    if sec["kind"] == "vp":
        t_max = 1.0 if sec["t_max"] is None else sec["t_max"]
        return NoiseSchedule.vp(sec["beta_min"], sec["beta_max"], sec["t_min"], t_max)
    if sec["kind"] == "otfm":
        t_max = 1.0 - 1e-3 if sec["t_max"] is None else sec["t_max"]
        return NoiseSchedule.otfm(sec["t_min"], t_max)
    raise ConfigError(f"unknown schedule kind {sec['kind']!r}")


def rbf_field_prior(cells: int, length_scale: float, variance: float = 1.0,
                    jitter: float = 1e-6) -> oracle.GaussianMixture:
    """Zero-mean Gaussian prior over a 1-d grid with smooth RBF covariance.

    The jitter ridge keeps the Cholesky factorization well posed; RBF kernels
    on dense grids are otherwise numerically rank deficient.
    """
    if cells < 1 or length_scale <= 0 or variance <= 0:
        raise ConfigError("field prior needs positive cells, length_scale, variance")
    idx = np.arange(cells, dtype=float)
    cov = variance * np.exp(-0.5 * ((idx[:, None] - idx[None, :]) / length_scale) ** 2)
    cov += jitter * np.eye(cells)
    return oracle.GaussianMixture(np.array([1.0]), np.zeros((1, cells)), cov[None])


def build_density(cfg: ExperimentConfig) -> oracle.GaussianMixture:
    sec = cfg.density
    if sec["kind"] == "mixture":
        means = np.asarray(sec["means"], dtype=float)
        weights = np.asarray(sec["weights"], dtype=float)
        covs = np.stack([sec["variance"] * np.eye(means.shape[1])] * means.shape[0])
        return oracle.GaussianMixture(weights, means, covs)
    if sec["kind"] == "gaussian_field":
        return rbf_field_prior(sec["cells"], sec["length_scale"],
                               sec["variance"], sec["jitter"])
    raise ConfigError(f"unknown density kind {sec['kind']!r}")


def build_operator(cfg: ExperimentConfig, dim: int) -> oracle.DegradationOperator:
    sec = cfg.operator
    kind = sec["kind"]
    noise_std = sec["noise_std"]
    if kind == "identity":
        return oracle.identity_operator(dim, noise_std)
    if kind == "blur":
        return oracle.blur_1d(sec["kernel_std"], dim, noise_std)
    if kind == "downsample":
        return oracle.downsample(sec["factor"], dim, noise_std)
    if kind == "mask":
        return oracle.mask(sec["indices"], dim, noise_std)
    if kind == "shrink":
        return oracle.shrink(sec["factor"], dim, noise_std)
    raise ConfigError(f"unknown operator kind {kind!r}")


def build_weights(cfg: ExperimentConfig, exponent: float | None = None) -> WeightSchedule:
    sec = cfg.guidance
    return WeightSchedule(sec["family"],
                          exponent=sec["exponent"] if exponent is None else exponent,
                          constant=sec["constant"])


def build_sampler(cfg: ExperimentConfig, schedule: NoiseSchedule,
                  solver: str | None = None) -> SamplerConfig:
    sec = cfg.sampler
    start = schedule.t_max if sec["start"] is None else sec["start"]
    end = schedule.t_min if sec["end"] is None else sec["end"]
    return SamplerConfig(steps=sec["steps"], start=start, end=end,
                         solver=solver or sec["solver"],
                         seed=cfg.experiment["seed"],
                         record_every=sec["record_every"])
