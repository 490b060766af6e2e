"""Command-line entry points.

Exit status: 0 on success, 1 if any verification check fails, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments, verify
from .config import ExperimentConfig, build_density, build_schedule
from .errors import ConfigError
from .scorenet import MlpNet, TrainConfig, save_weights, train
from .oracle import gm_sample


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
    else:
        cfg = ExperimentConfig.from_dict({})
    doc = cfg.to_dict()
    if args.seed is not None:
        doc["experiment"]["seed"] = args.seed
    if args.trials is not None:
        doc["experiment"]["trials"] = args.trials
    if args.out is not None:
        doc["experiment"]["out"] = args.out
    return ExperimentConfig.from_dict(doc)


def _save(record: experiments.RunRecord, cfg: ExperimentConfig) -> int:
    out = record.save(cfg.experiment["out"])
    print(f"wrote {out}/record.json")
    for path in record.artifacts:
        print(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    record = verify.run_verify()
    cfg = ExperimentConfig.from_dict({"experiment": {"kind": "verify",
                                                     "out": args.out or "runs"}})
    record.save(cfg.experiment["out"])
    return 0 if record.extras["all_passed"] else 1


def cmd_restore(args) -> int:
    cfg = _load_config(args)
    return _save(experiments.run_restore(cfg), cfg)


def cmd_ablate_exponent(args) -> int:
    cfg = _load_config(args)
    return _save(experiments.run_ablate_exponent(cfg), cfg)


def cmd_ablate_weightfn(args) -> int:
    cfg = _load_config(args)
    return _save(experiments.run_ablate_weight_family(cfg), cfg)


def cmd_baseline_sdedit(args) -> int:
    cfg = _load_config(args)
    return _save(experiments.run_baseline_sdedit(cfg), cfg)


def cmd_sample(args) -> int:
    cfg = _load_config(args)
    return _save(experiments.run_sample_unguided(cfg), cfg)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    schedule = build_schedule(cfg)
    gm = build_density(cfg)
    seed = cfg.experiment["seed"]
    rng = np.random.default_rng(seed)
    data = gm_sample(gm, max(8192, 4 * 256), rng)
    net = MlpNet.init(gm.dim, rng=rng)
    trained, curve = train(net, data, TrainConfig(steps=args.steps, seed=seed), schedule)
    out = Path(cfg.experiment["out"])
    out.mkdir(parents=True, exist_ok=True)
    weights_path = out / "scorenet.htx"
    save_weights(trained, weights_path)
    print(f"wrote {weights_path}")
    print(f"loss: first {curve[0, 1]:.4f} last {curve[-1, 1]:.4f}")
    return 0


def cmd_report(args) -> int:
    record = experiments.RunRecord.from_json(args.record)
    out = Path(args.out or Path(args.record).parent)
    path = experiments.emit_report(record, args.format, out)
    print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="htx",
                                     description="Guided diffusion sampling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("verify", help="run all verification checks")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_verify)

    for name, fn in (("restore", cmd_restore),
                     ("ablate-exponent", cmd_ablate_exponent),
                     ("ablate-weightfn", cmd_ablate_weightfn),
                     ("baseline-sdedit", cmd_baseline_sdedit),
                     ("sample", cmd_sample)):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("train", help="train the score net on the configured density")
    common(p)
    p.add_argument("--steps", type=int, default=5000)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("report", help="re-emit reports from a saved record")
    p.add_argument("--record", required=True, help="path to record.json")
    p.add_argument("--format", choices=("csv", "svg"), default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
