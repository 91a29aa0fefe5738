"""Command-line harness.

``qlan run --config CFG`` executes every job of a config; ``qlan COMMAND
--config CFG`` executes only the jobs of that command. Jobs may also be given
inline with ``--set key=value`` (values are parsed as YAML), in which case no
config file is needed for commands that reference no named objects.

Exit codes: 0 all pass flags true, 1 some pass flag false, 2 usage or config
error, 3 numerical failure in at least one job.
"""

from __future__ import annotations

import argparse
import sys

import yaml

from qlan.config import COMMANDS, ConfigError, RunConfig, load_config, parse_config
from qlan.jobs import JobFailure, run_config

__all__ = ["main", "build_parser"]

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser, config_required: bool) -> None:
    p.add_argument("--config", metavar="PATH", required=config_required, help="run configuration (JSON or YAML)")
    p.add_argument("--out", metavar="DIR", help="artifact directory (overrides output.dir)")
    p.add_argument("--jobs", metavar="N", type=int, default=1, help="run up to N jobs in parallel")
    p.add_argument("--tolerance-scale", metavar="X", type=float, default=1.0, help="multiply every tolerance by X")
    p.add_argument("--seed", metavar="N", type=int, default=0, help="seed for randomized test words")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlan", description="Classical and quantum statistical experiment laboratory.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    _common(sub.add_parser("run", help="run every job of a config"), config_required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} jobs of a config, or one inline job")
        _common(p, config_required=False)
        p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], help="inline job parameter")
    return parser


def _inline_config(args) -> RunConfig:
    """Config with one job of ``args.command`` built from ``--set`` pairs."""
    base = load_config(args.config).to_dict() if args.config else {}
    job = {"name": args.command, "command": args.command}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}", None, "<command line>")
        try:
            job[key] = yaml.safe_load(value)
        except yaml.YAMLError:
            raise ConfigError(f"cannot parse value of {key!r}", None, "<command line>") from None
    base["jobs"] = [job]
    return parse_config(yaml.safe_dump(base, sort_keys=False), "<command line>")


def _print_result(res) -> None:
    if isinstance(res, JobFailure):
        print(f"{res.name} [{res.command}] NUMERICAL FAILURE: {res.error}", file=sys.stderr)
        return
    status = "pass" if res.passed else "FAIL"
    for line in res.summary:
        print(f"{res.name} [{res.command}] {line}")
    print(f"{res.name} [{res.command}] {status}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    if args.jobs < 1:
        print("qlan: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    if not args.tolerance_scale > 0:
        print("qlan: --tolerance-scale must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            select = None
        elif args.set:
            cfg = _inline_config(args)
            select = None
        else:
            if not args.config:
                print(f"qlan {args.command}: give --config or --set", file=sys.stderr)
                return EXIT_USAGE
            cfg = load_config(args.config)
            command = args.command
            select = lambda j: j.command == command
    except ConfigError as exc:
        print(f"qlan: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        cfg = cfg.with_output_dir(args.out)
    try:
        results = run_config(cfg, args.jobs, args.tolerance_scale, args.seed, select, on_result=_print_result)
    except (KeyError, ValueError) as exc:
        print(f"qlan: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if any(isinstance(r, JobFailure) for r in results):
        return EXIT_NUMERICAL
    return EXIT_PASS if all(r.passed for r in results) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
