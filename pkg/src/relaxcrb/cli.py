"""Command-line entry point: ``relaxcrb <command> --config <path> ...``.

Exit codes: 0 success, 2 configuration error, 3 some protocols failed,
4 every protocol failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from .commands import COMMANDS, EXIT_CONFIG
from .config import FORMATS, load_config
from .errors import ConfigError
from .report import write_reports

THREADS_ENV = "RELAXCRB_THREADS"
U64_MAX = 2**64 - 1


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="relaxcrb",
        description="Cramer-Rao bound analysis and design of relaxometry protocols.",
    )
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, type=Path, help="run configuration file")
    p.add_argument("--out", type=Path, help="output directory (default: print to stdout)")
    p.add_argument("--format", choices=FORMATS, help="report format (default csv)")
    p.add_argument("--seed", type=_u64, help="Monte Carlo seed (overrides the config)")
    p.add_argument("--trials", type=_positive_int, help="Monte Carlo trials per tissue point")
    p.add_argument(
        "--threads", type=_positive_int, help=f"worker threads (fallback: ${THREADS_ENV})"
    )
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return p


def resolve_threads(cli_value: int | None, config_value: int | None, environ=os.environ) -> int:
    if cli_value is not None:
        return cli_value
    env = environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1")
        return value
    return config_value or 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config, args.command)
        overrides = {"threads": resolve_threads(args.threads, config.threads)}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.trials is not None:
            overrides["n_trials"] = args.trials
        if args.format is not None:
            overrides["format"] = args.format
        if args.out is not None:
            overrides["out"] = args.out
        config = dataclasses.replace(config, **overrides)
        if config.out is not None and config.out.exists() and not config.out.is_dir():
            raise ConfigError(f"output path {config.out} is not a directory", field="out")
        result = COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"relaxcrb: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    files = write_reports(args.command, result.tables, config.out, config.format)
    if config.out is None:
        for content in files.values():
            sys.stdout.write(content)
    if result.n_failed:
        print(
            f"relaxcrb: {result.n_failed} of {result.n_ok + result.n_failed} failed",
            file=sys.stderr,
        )
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
