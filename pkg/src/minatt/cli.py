"""Command line front end.

``minatt run config.json`` executes a scenario and prints (or writes) the
report; ``minatt list-generators`` shows the built-in diagonal generators.

Exit codes: 0 all experiments passed, 1 at least one failed, 2 the config
was unusable, 3 the report could not be written.
"""

from __future__ import annotations

import argparse
import json
import sys

from .operators import list_generators
from .scenario import ConfigError, load_config, report_to_csv, report_to_json, run_scenario

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minatt",
        description="minimum-attaining perturbations and gap computations")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("config", help="path to a scenario JSON file")
    run.add_argument("--out", help="write the report here instead of stdout")
    run.add_argument("--format", choices=("json", "csv"), default="json",
                     help="report format (default json)")
    run.add_argument("--truncation", type=int, metavar="N",
                     help="default prefix length for experiments without their own")
    run.add_argument("--seed", type=int, help="seed for randomised gap soaks")

    sub.add_parser("list-generators", help="list built-in diagonal generators")
    return parser


def _cmd_run(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        print(f"minatt: cannot read config: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"minatt: config is not valid JSON: {exc}", file=sys.stderr)
        return 2
    if args.truncation is not None and args.truncation < 1:
        print("minatt: --truncation must be >= 1", file=sys.stderr)
        return 2
    try:
        config = load_config(doc)
    except ConfigError as exc:
        print(f"minatt: bad config: {exc}", file=sys.stderr)
        return 2

    report = run_scenario(config, truncation=args.truncation, seed=args.seed)
    text = report_to_json(report) if args.format == "json" else report_to_csv(report)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"minatt: cannot write report: {exc}", file=sys.stderr)
            return 3
    else:
        sys.stdout.write(text)
    return 0 if report.all_passed else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list-generators":
        for name in list_generators():
            print(name)
        return 0
    return _cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
