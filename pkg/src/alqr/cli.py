"""Command-line entry point for the experiment harness.

Exit codes: 0 success, 2 configuration error, 3 any per-seed runner failure.
The ALQR_LOG environment variable sets the log level (DEBUG/INFO/WARNING).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .exceptions import ConfigurationError
from .harness import (
    CRITERION_ALIASES,
    ExperimentConfig,
    load_config,
    parse_seed_range,
    run_experiment,
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="alqr",
        description="Adaptive SDP-based LQ control experiment harness.",
    )
    p.add_argument("--config", metavar="PATH", help="JSON experiment config")
    p.add_argument("--mode", choices=["warmup", "aslo", "doubling", "full"])
    p.add_argument("--criterion",
                   choices=["det2", "fixed-beta", "adaptive", "relaxed-seq"])
    p.add_argument("--constants", choices=["theory", "practical"])
    p.add_argument("--T", type=int, metavar="N")
    p.add_argument("--seeds", metavar="a..b", help="seed range a..b or comma list")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--benchmark", metavar="NAME",
                   help="named plant (scalar-golden, bench-2x2, bench-3x2)")
    p.add_argument("--beta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--workers", type=int)
    return p


def config_from_args(args) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config)
        raw = config.to_dict()
    else:
        raw = ExperimentConfig().to_dict()
    if args.mode:
        raw["mode"] = args.mode
    if args.criterion:
        raw["criterion"] = CRITERION_ALIASES[args.criterion]
    if args.constants:
        raw["constants"] = args.constants
    if args.T is not None:
        raw["T"] = args.T
    if args.seeds:
        raw["seeds"] = parse_seed_range(args.seeds)
    if args.out:
        raw["out_dir"] = args.out
    if args.benchmark:
        raw["benchmark"] = args.benchmark
        raw["model"] = None
    if args.beta is not None:
        raw["beta"] = args.beta
    if args.delta is not None:
        raw["delta"] = args.delta
    if args.workers is not None:
        raw["workers"] = args.workers
    return ExperimentConfig(**raw)


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ALQR_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except ConfigurationError as exc:
        print(f"config error ({exc.field}): {exc}", file=sys.stderr)
        return 2
    report = run_experiment(config)
    agg = report.aggregate
    print(f"seeds ok: {agg.get('seed_count', 0)}  failed: {len(report.errors)}")
    for key in ("final_regret_mean", "regret_slope", "est_error_slope",
                "coverage_frequency", "epochs_mean"):
        if key in agg:
            print(f"{key}: {agg[key]:.6g}")
    for err in report.errors:
        print(f"seed {err['seed']} failed: {err['error']}", file=sys.stderr)
    if config.out_dir:
        print(f"outputs in {config.out_dir}")
    return 3 if report.errors else 0


if __name__ == "__main__":
    sys.exit(main())
