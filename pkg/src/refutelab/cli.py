"""Command-line entry point: ``refutelab <experiment> [options]``."""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigurationError
from .harness import EXPERIMENTS, ExperimentConfig, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="refutelab", description="Refutation and agnostic learning experiments.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", help="YAML config file; missing keys take the pipeline defaults")
        p.add_argument("--seed", type=int, help="root seed (unsigned 64-bit)")
        p.add_argument("--out", help="output directory for report.json and CSVs")
        p.add_argument("--trials", type=int, help="trial count override")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="csv writes per-metric CSVs next to report.json")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    overrides = {"seed": args.seed, "trials": args.trials}
    try:
        if args.config:
            cfg = ExperimentConfig.load(args.config, args.experiment, **overrides)
        else:
            data = {k: v for k, v in overrides.items() if v is not None}
            cfg = ExperimentConfig.from_mapping(data, args.experiment)
    except (ConfigurationError, OSError, ValueError, TypeError) as err:
        print(f"error: invalid config: {err}", file=sys.stderr)
        return 2
    report = run_experiment(cfg)
    if args.out:
        for path in report.write(args.out, args.format):
            print(f"wrote {path}")
    else:
        sys.stdout.write(report.dumps())
    line = f"{cfg.experiment}: {report.verdict}"
    if report.error:
        line += f" ({report.error})"
    print(line, file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
