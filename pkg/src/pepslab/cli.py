"""Command-line entry point: ``pepslab <kind> --config FILE`` and ``pepslab validate``."""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pepslab",
        description="Run random-PEPS, stabilizer-PEPS and replica-magnet experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True, help="path to a JSON config")
    for name in sorted(experiments.KINDS):
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--jobs", type=int, default=1, help="worker processes over seeds")
        p.add_argument("--output", default=None, help="output directory (overrides config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = experiments.load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        diags = experiments.validate(config)
        for d in diags:
            print(d)
        if not diags:
            print("ok")
            for line in experiments.budget_estimates(config):
                print(f"  {line}")
        return 1 if diags else 0
    if config.get("kind") != args.command:
        print(f"error: config kind {config.get('kind')!r} does not match command "
              f"{args.command!r}", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        art = experiments.run(config, jobs=args.jobs, output_dir=args.output)
    except experiments.ConfigError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return 2
    failed = [s for s in art.manifest["seeds"] if s["status"] != "ok"]
    for s in failed:
        print(f"seed {s['seed']} failed: {s['error']}", file=sys.stderr)
    for t in art.manifest["tables"]:
        print(f"{art.output_dir}/{t['file']}: {t['rows']} rows")
    return 1 if art.all_failed else 0


if __name__ == "__main__":
    sys.exit(main())
