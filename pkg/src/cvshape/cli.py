"""Command-line entry point.

Runs one scenario and emits its report.  Exit status: 0 when every
configured criterion passes on the final state, 1 when any fails, 2 on
configuration or usage errors.  The CVSHAPE_SEED environment variable
overrides the configured Monte Carlo seed; an explicit --seed beats both.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .experiments import ConfigError, ExperimentConfig, SCENARIOS, emit, run

SEED_ENV_VAR = "CVSHAPE_SEED"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvshape",
        description="Build, shape, and verify continuous-variable cluster states.",
    )
    parser.add_argument("--scenario", choices=SCENARIOS, help="scenario to run")
    parser.add_argument("--config", metavar="PATH", help="key = value config file")
    parser.add_argument("--trials", type=int, metavar="N", help="Monte Carlo trajectories (0 = analytic only)")
    parser.add_argument("--seed", type=int, metavar="S", help="Monte Carlo seed")
    parser.add_argument(
        "--analytic-only", action="store_true", help="skip Monte Carlo regardless of configured trials"
    )
    parser.add_argument("--lossless", action="store_true", help="disable every loss stage")
    parser.add_argument("--output", metavar="PATH", help="report file (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), help="report format (default: json)")
    parser.add_argument(
        "--timing", action="store_true", help="include wall time in the report (breaks byte determinism)"
    )
    return parser


def _resolve_config(args) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_file(args.config)
    else:
        if not args.scenario:
            raise ConfigError("give --scenario or --config")
        config = ExperimentConfig(scenario=args.scenario)

    updates = {}
    if args.scenario:
        updates["scenario"] = args.scenario
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            updates["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from None
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.analytic_only:
        updates["trials"] = 0
    if args.lossless:
        updates["lossless"] = True
    if args.output:
        updates["output"] = args.output
    if args.format:
        updates["format"] = args.format
    return replace(config, **updates) if updates else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
        report = run(config)
        text = emit(report, path=config.output, include_timing=args.timing)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if config.output is None:
        sys.stdout.write(text)
    return 0 if report.final_criteria.all_pass else 1


if __name__ == "__main__":
    sys.exit(main())
