"""
Command-line entry point.

    hamlearn <command> --config run.json --out results/ [--seed N] [--parallel N] [-v|-q]

Commands: gen-data, learn-ham, learn-state, learn-su3, sweep, validate.
Exit status: 0 success, 2 schema/dimension error, 3 divergence, 4 I/O failure.
"""

from typing import List, Optional
import argparse
import json
import logging
import os
import sys

from .config import ExperimentConfig
from .errors import HamLearnError
from .experiment import ExperimentResult, ExperimentRunner

logger = logging.getLogger(__name__)

COMMANDS = ("gen-data", "learn-ham", "learn-state", "learn-su3", "sweep", "validate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamlearn",
        description="Learn Hamiltonians and states from time-series observable data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="JSON experiment config (defaults are used when omitted)")
        cmd.add_argument("--out", default=".", help="Output directory")
        cmd.add_argument("--seed", type=int, help="Override the config seed")
        cmd.add_argument("--parallel", type=int, help="Worker-pool size for sweeps")
        verbosity = cmd.add_mutually_exclusive_group()
        verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
        verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    return parser


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _write_error(out_dir: str, result: ExperimentResult) -> None:
    record = result.to_dict()
    print(json.dumps({k: record[k] for k in ("mode", "error_type", "error_message", "exit_code")}),
          file=sys.stderr)
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "error.json"), "w") as fh:
            json.dump(record, fh, indent=2)
    except OSError as e:
        logger.error("Could not write error.json: %s", e)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments without the program name (sys.argv[1:] when None)

    Returns:
        Process exit status
    """
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    try:
        config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        config = config.with_overrides(seed=args.seed, parallel=args.parallel, mode=args.command)
    except HamLearnError as e:
        result = ExperimentResult(args.command, status="error", exit_code=e.exit_code,
                                  error_type=type(e).__name__, error_message=str(e))
        _write_error(args.out, result)
        return result.exit_code
    runner = ExperimentRunner(config, args.out)
    result = runner.run()
    if result.status != "ok":
        _write_error(args.out, result)
        return result.exit_code
    if not args.quiet:
        print(runner.summary(), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
