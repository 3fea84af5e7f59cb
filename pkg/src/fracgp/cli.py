"""Command line entry point: ``fracgp run`` and ``fracgp report``.

Exit codes: 0 success, 1 a report check failed, 2 configuration or input
error, 3 numerical failure during a run.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__, reports
from .errors import ConfigError, FracGPError, InputError, NumericalError
from .rundir import execute, load_config, load_runs, seed_offset

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("fracgp")


def build_parser():
    parser = argparse.ArgumentParser(prog="fracgp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fracgp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run GP-TS for every seed in a config")
    run.add_argument("--config", required=True, help="JSON experiment config")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--parallel", type=int, default=1, help="worker processes (across seeds)")

    rep = sub.add_parser("report", help="aggregate run directories")
    rep.add_argument("mode", choices=reports.MODES)
    rep.add_argument("run_dirs", nargs="*", help="run directories (unused by 'identity')")
    rep.add_argument("--out", required=True, help="output path; .csv/.json/.png share its stem")
    rep.add_argument("--pool-size", type=int, default=None, help="gamma mode: greedy pool size")
    rep.add_argument("--instances", type=int, default=100, help="identity mode: random instances")
    rep.add_argument("--seed", type=int, default=0, help="identity/gamma mode seed")
    return parser


def cmd_run(args):
    if args.parallel < 1:
        raise ConfigError("--parallel must be >= 1")
    config = load_config(args.config)
    offset = seed_offset()
    manifest, failures = execute(config, args.out, args.parallel, offset, log.info)
    for seed, err in failures:
        print(f"seed {seed} aborted: {err}", file=sys.stderr)
    if failures:
        return EXIT_NUMERIC
    print(f"wrote {len(manifest['seeds'])} traces to {args.out} (config {manifest['config_hash'][:12]})")
    return EXIT_OK


def cmd_report(args):
    if args.mode == "identity":
        report = reports.identity(args.instances, args.seed)
    else:
        if not args.run_dirs:
            raise ConfigError(f"report {args.mode} needs at least one run directory")
        runs = load_runs(args.run_dirs)
        if args.mode == "regret-slope":
            report = reports.regret_slope(runs)
        elif args.mode == "gamma":
            report = reports.gamma(runs, args.pool_size, args.seed)
        else:
            report = reports.saturation(runs)
    paths = report.write(args.out)
    print("\n".join(str(p) for p in paths))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_report(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FracGPError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
