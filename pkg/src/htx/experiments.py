"""Experiment drivers: restoration, ablations, the start-guided baseline.

Every driver returns a RunRecord holding the full per-trial metric table, the
aggregate rows (mean and standard error), and enough configuration to rerun
bitwise.  Trials use common random numbers across arms: trial i of every arm
sees the same (fine sample, degradation noise, start point), which removes
between-arm Monte Carlo variance from ordering comparisons.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import oracle, report
from ._version import __version__
from .config import (ExperimentConfig, build_density, build_operator,
                     build_sampler, build_schedule, build_weights)
from .guidance import (GuidanceSpec, guided_score_drift, region_exponents,
                       sdedit_start, unguided_drift)
from .schedules import NoiseSchedule, WeightSchedule
from .scorenet import mixture_score_model
from .solvers import SamplerConfig, sample_ode, trial_rng

ERROR_CURVE_POINTS = 9


@dataclass(frozen=True)
class MetricSet:
    """Per-trial endpoint metrics; squared errors are per-coordinate means."""

    mse_to_y: float
    mse_to_coarse: float
    loglik_p0: float
    error_curve: list[float] = field(default_factory=list)
    posterior_mse: float | None = None
    moment_distances: dict | None = None

    def as_row(self) -> dict:
        row = {
            "mse_to_y": self.mse_to_y,
            "mse_to_coarse": self.mse_to_coarse,
            "loglik_p0": self.loglik_p0,
        }
        if self.posterior_mse is not None:
            row["posterior_mse"] = self.posterior_mse
        return row


@dataclass
class RunRecord:
    """Persisted outcome of one experiment run."""

    kind: str
    digest: str
    config: dict
    seed: int
    per_trial: dict[str, list[dict]]
    aggregates: list[dict]
    version: str = __version__
    artifacts: list[str] = field(default_factory=list)
    checks: list[dict] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "digest": self.digest,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "per_trial": self.per_trial,
            "aggregates": self.aggregates,
            "artifacts": self.artifacts,
            "checks": self.checks,
            "extras": self.extras,
        }

    @classmethod
    def from_json(cls, path) -> "RunRecord":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(**doc)

    def save(self, out_root) -> Path:
        """Write record.json, metrics.csv, and SVG charts under <out>/<digest>/."""
        out = Path(out_root) / self.digest
        out.mkdir(parents=True, exist_ok=True)
        csv_path = emit_report(self, "csv", out)
        self.artifacts = [csv_path]
        if len(self.aggregates) > 1:
            self.artifacts.extend(emit_report(self, "svg", out))
        record_path = out / "record.json"
        record_path.write_text(json.dumps(self.to_dict(), indent=2, default=_jsonable))
        return out


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def mean_se(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size <= 1:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def aggregate_rows(per_trial: list[dict], series: str, x: float) -> dict:
    """Collapse per-trial rows into one aggregate row with mean and SE columns."""
    row = {"series": series, "x": x, "n": len(per_trial)}
    for key in per_trial[0]:
        mean, se = mean_se([trial[key] for trial in per_trial])
        row[f"{key}_mean"] = mean
        row[f"{key}_se"] = se
    return row


# ---------------------------------------------------------------------------
# Trial engines
# ---------------------------------------------------------------------------


def _draw_trials(gm: oracle.GaussianMixture, op: oracle.DegradationOperator,
                 n_trials: int, seed: int):
    """Per-trial (fine, coarse, measurement, start) from private streams."""
    d = gm.dim
    fine = np.empty((n_trials, d))
    coarse = np.empty((n_trials, d))
    meas = np.empty((n_trials, op.measurement_dim))
    starts = np.empty((n_trials, d))
    for i in range(n_trials):
        rng = trial_rng(seed, i)
        y = oracle.gm_sample(gm, 1, rng)[0]
        pair = oracle.degrade(op, y, rng)
        fine[i] = y
        coarse[i] = pair.coarse
        meas[i] = pair.measurement
        starts[i] = rng.standard_normal(d)
    return fine, coarse, meas, starts


def _error_curve(schedule: NoiseSchedule, scfg: SamplerConfig,
                 fine: np.ndarray, coarse: np.ndarray) -> np.ndarray:
    """Surrogate-error magnitude (alpha/sigma^2) ||coarse - fine|| on a time grid."""
    ts = np.linspace(scfg.start, scfg.end, ERROR_CURVE_POINTS)
    a, s = schedule.alpha_sigma(ts)
    gaps = np.linalg.norm(coarse - fine, axis=-1)
    return (a / (s * s))[None, :] * gaps[:, None]


def restore_trials(gm: oracle.GaussianMixture, op: oracle.DegradationOperator,
                   schedule: NoiseSchedule, scfg: SamplerConfig, n_trials: int,
                   seed: int, weights: WeightSchedule | None,
                   exponent_map: np.ndarray | None = None,
                   with_posterior: bool = True) -> list[MetricSet]:
    """One restoration arm; weights=None runs the unguided reference.

    All trials integrate as a single batch: the guided drift broadcasts over a
    matrix of per-trial coarse references.
    """
    model = mixture_score_model(gm, schedule)
    fine, coarse, meas, starts = _draw_trials(gm, op, n_trials, seed)
    if weights is None:
        drift = unguided_drift(model, schedule)
    else:
        spec = GuidanceSpec(coarse=coarse, weights=weights, exponent_map=exponent_map)
        drift = guided_score_drift(model, spec, schedule)
    traj = sample_ode(drift, scfg, x_start=starts)
    endpoints = traj.endpoint

    post_mse = None
    if with_posterior and op.noise_std > 0:
        post_mse = np.empty(n_trials)
        for i in range(n_trials):
            post = oracle.linear_gaussian_posterior(gm, op, meas[i])
            post_mse[i] = float(np.mean((post.mean() - fine[i]) ** 2))

    curves = _error_curve(schedule, scfg, fine, coarse)
    loglik = oracle.gm_logpdf(gm, endpoints)
    out = []
    for i in range(n_trials):
        out.append(MetricSet(
            mse_to_y=float(np.mean((endpoints[i] - fine[i]) ** 2)),
            mse_to_coarse=float(np.mean((endpoints[i] - coarse[i]) ** 2)),
            loglik_p0=float(loglik[i]),
            error_curve=curves[i].tolist(),
            posterior_mse=None if post_mse is None else float(post_mse[i]),
        ))
    return out


def sdedit_trials(gm: oracle.GaussianMixture, op: oracle.DegradationOperator,
                  schedule: NoiseSchedule, scfg: SamplerConfig, n_trials: int,
                  seed: int, t0: float) -> tuple[list[MetricSet], np.ndarray]:
    """Start-guided baseline arm: noise each coarse sample to t0, sample unguided."""
    model = mixture_score_model(gm, schedule)
    d = gm.dim
    fine = np.empty((n_trials, d))
    coarse = np.empty((n_trials, d))
    starts = np.empty((n_trials, d))
    for i in range(n_trials):
        rng = trial_rng(seed, i)
        y = oracle.gm_sample(gm, 1, rng)[0]
        pair = oracle.degrade(op, y, rng)
        fine[i] = y
        coarse[i] = pair.coarse
        starts[i], _ = sdedit_start(pair.coarse, t0, schedule, rng)
    cfg = SamplerConfig(steps=scfg.steps, start=t0, end=scfg.end,
                        solver=scfg.solver, seed=seed, record_every=scfg.record_every)
    traj = sample_ode(unguided_drift(model, schedule), cfg, x_start=starts)
    endpoints = traj.endpoint
    loglik = oracle.gm_logpdf(gm, endpoints)
    rows = [MetricSet(
        mse_to_y=float(np.mean((endpoints[i] - fine[i]) ** 2)),
        mse_to_coarse=float(np.mean((endpoints[i] - coarse[i]) ** 2)),
        loglik_p0=float(loglik[i]),
    ) for i in range(n_trials)]
    return rows, endpoints


# ---------------------------------------------------------------------------
# Experiment drivers
# ---------------------------------------------------------------------------


def _setup(cfg: ExperimentConfig):
    schedule = build_schedule(cfg)
    gm = build_density(cfg)
    op = build_operator(cfg, gm.dim)
    scfg = build_sampler(cfg, schedule)
    return gm, op, schedule, scfg


def _exponent_map_from_config(cfg: ExperimentConfig, op: oracle.DegradationOperator):
    g = cfg.guidance
    if g["valid_exponent"] is None and g["invalid_exponent"] is None:
        return None
    valid_e = g["valid_exponent"] if g["valid_exponent"] is not None else g["exponent"]
    invalid_e = g["invalid_exponent"] if g["invalid_exponent"] is not None else g["exponent"]
    return region_exponents(op.valid, valid_e, invalid_e)


def run_restore(cfg: ExperimentConfig) -> RunRecord:
    """Guided restoration with an unguided arm and the posterior-mean reference."""
    gm, op, schedule, scfg = _setup(cfg)
    trials = cfg.experiment["trials"]
    seed = cfg.experiment["seed"]
    weights = build_weights(cfg)
    emap = _exponent_map_from_config(cfg, op)

    guided = restore_trials(gm, op, schedule, scfg, trials, seed, weights, emap)
    unguided = restore_trials(gm, op, schedule, scfg, trials, seed, None)
    per_trial = {
        "guided": [m.as_row() for m in guided],
        "unguided": [m.as_row() for m in unguided],
    }
    aggregates = [
        aggregate_rows(per_trial["guided"], "guided", cfg.guidance["exponent"]),
        aggregate_rows(per_trial["unguided"], "unguided", cfg.guidance["exponent"]),
    ]
    extras = {"error_curve_times": np.linspace(scfg.start, scfg.end,
                                               ERROR_CURVE_POINTS).tolist(),
              "guided_error_curves_mean": np.mean([m.error_curve for m in guided],
                                                  axis=0).tolist()}
    return RunRecord(kind="restore", digest=cfg.digest(), config=cfg.to_dict(),
                     seed=seed, per_trial=per_trial, aggregates=aggregates,
                     extras=extras)


def run_ablate_exponent(cfg: ExperimentConfig, exponents=None) -> RunRecord:
    """One guided arm per weight exponent, with common random numbers."""
    exponents = list(cfg.experiment["exponents"] if exponents is None else exponents)
    if len(exponents) < 1:
        raise ValueError("need at least one exponent")
    gm, op, schedule, scfg = _setup(cfg)
    trials = cfg.experiment["trials"]
    seed = cfg.experiment["seed"]

    per_trial = {}
    aggregates = []
    for a in exponents:
        arm = f"a={a:g}"
        rows = [m.as_row() for m in restore_trials(
            gm, op, schedule, scfg, trials, seed, build_weights(cfg, exponent=a))]
        per_trial[arm] = rows
        agg = aggregate_rows(rows, cfg.guidance["family"], float(a))
        aggregates.append(agg)
    return RunRecord(kind="ablate_exponent", digest=cfg.digest(), config=cfg.to_dict(),
                     seed=seed, per_trial=per_trial, aggregates=aggregates)


def run_ablate_weight_family(cfg: ExperimentConfig, families=None,
                             exponents=None) -> RunRecord:
    """One arm per (weight family, exponent) pair."""
    from .schedules import CONSTANT, POWER_OF_SIGMA, POWER_OF_TIME

    families = list(families or (POWER_OF_SIGMA, POWER_OF_TIME))
    exponents = list(exponents or (3.0, 5.0, 7.0))
    gm, op, schedule, scfg = _setup(cfg)
    trials = cfg.experiment["trials"]
    seed = cfg.experiment["seed"]

    per_trial = {}
    aggregates = []
    for family in families:
        for a in exponents:
            ws = WeightSchedule(family, exponent=a, constant=cfg.guidance["constant"])
            arm = f"{family}:a={a:g}" if family != CONSTANT else f"constant:c={ws.constant:g}"
            rows = [m.as_row() for m in restore_trials(
                gm, op, schedule, scfg, trials, seed, ws)]
            per_trial[arm] = rows
            aggregates.append(aggregate_rows(rows, family, float(a)))
    return RunRecord(kind="ablate_weight_family", digest=cfg.digest(),
                     config=cfg.to_dict(), seed=seed, per_trial=per_trial,
                     aggregates=aggregates)


def run_baseline_sdedit(cfg: ExperimentConfig, t0_list=None) -> RunRecord:
    """Start-guided baseline swept over the noising time t0."""
    gm, op, schedule, scfg = _setup(cfg)
    trials = cfg.experiment["trials"]
    seed = cfg.experiment["seed"]
    if t0_list is None:
        t0_list = [f * schedule.horizon for f in cfg.experiment["t0_fractions"]]

    per_trial = {}
    aggregates = []
    for t0 in t0_list:
        rows, _ = sdedit_trials(gm, op, schedule, scfg, trials, seed, float(t0))
        arm = f"t0={t0:g}"
        per_trial[arm] = [m.as_row() for m in rows]
        aggregates.append(aggregate_rows(per_trial[arm], "sdedit", float(t0)))
    return RunRecord(kind="baseline_sdedit", digest=cfg.digest(), config=cfg.to_dict(),
                     seed=seed, per_trial=per_trial, aggregates=aggregates)


def run_sample_unguided(cfg: ExperimentConfig) -> RunRecord:
    """Unguided endpoint draws from the oracle density, with moment diagnostics."""
    gm, _, schedule, scfg = _setup(cfg)
    trials = cfg.experiment["trials"]
    seed = cfg.experiment["seed"]
    model = mixture_score_model(gm, schedule)
    starts = np.stack([trial_rng(seed, i).standard_normal(gm.dim)
                       for i in range(trials)])
    traj = sample_ode(unguided_drift(model, schedule), scfg, x_start=starts)
    endpoints = traj.endpoint
    loglik = oracle.gm_logpdf(gm, endpoints)
    rows = [{"loglik_p0": float(loglik[i])} for i in range(trials)]
    agg = aggregate_rows(rows, "unguided", 0.0)
    agg["moment_distances"] = {
        "mean_gap": float(np.linalg.norm(endpoints.mean(axis=0) - gm.mean())),
        "cov_gap": float(np.linalg.norm(np.cov(endpoints.T) - gm.covariance())),
    }
    record = RunRecord(kind="sample_unguided", digest=cfg.digest(),
                       config=cfg.to_dict(), seed=seed,
                       per_trial={"unguided": rows}, aggregates=[agg])
    record.extras["endpoints"] = endpoints.tolist()
    return record


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def emit_report(record: RunRecord, fmt: str, out_dir):
    """Write the aggregate table as CSV, or per-metric SVG line charts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        if record.checks and not record.aggregates:
            header = ["name", "passed", "value", "threshold", "detail"]
            rows = [[c["name"], c["passed"], c["value"], c["threshold"], c["detail"]]
                    for c in record.checks]
            return report.write_csv(out_dir / "metrics.csv", header, rows)
        keys = sorted({k for row in record.aggregates for k in row
                       if k not in ("series", "x", "n", "moment_distances")})
        header = ["series", "x", "n", *keys]
        rows = [[row["series"], row["x"], row["n"], *(row.get(k, "") for k in keys)]
                for row in record.aggregates]
        return report.write_csv(out_dir / "metrics.csv", header, rows)
    if fmt == "svg":
        paths = []
        for metric in ("mse_to_y", "mse_to_coarse", "loglik_p0"):
            col = f"{metric}_mean"
            by_series: dict[str, tuple[list, list]] = {}
            for row in record.aggregates:
                if col not in row:
                    continue
                xs, ys = by_series.setdefault(row["series"], ([], []))
                xs.append(row["x"])
                ys.append(row[col])
            if not by_series or all(len(xs) < 2 for xs, _ in by_series.values()):
                continue
            xs0 = next(iter(by_series.values()))[0]
            path = report.svg_line_chart(
                out_dir / f"{metric}.svg", xs0,
                {name: ys for name, (xs, ys) in by_series.items()},
                xlabel="configuration", ylabel=metric,
                title=f"{record.kind}: {metric}")
            paths.append(path)
        return paths
    raise ValueError(f"unknown report format {fmt!r}")
