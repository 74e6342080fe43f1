"""``fdl`` command line.

Exit codes: 0 success, 1 configuration error, 2 a bound or verdict check
failed, 3 the numerics gave up.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import load_config
from .errors import ConfigError
from .report import emit, json_text
from .runs import EXIT_CONFIG, EXIT_OK, execute

log = logging.getLogger("fdlab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdl", description="Periodic eigenvalue laboratory for moving intervals.")
    parser.add_argument("command", choices=("validate", "eigen", "bounds", "sweep", "nonlinear"))
    parser.add_argument("--config", required=True, type=Path, help="experiment config (JSON)")
    parser.add_argument("--out", type=Path, help="output directory (required except for validate)")
    parser.add_argument("--jobs", type=int, default=None, help="parallel sweep workers (default: all cores)")
    parser.add_argument("--refine", type=int, default=0, help="double M and Nt this many times")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.refine < 0:
            raise ConfigError("--refine: must be >= 0")
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs: must be >= 1")
        cfg = load_config(args.config)
        if args.command == "validate":
            sys.stdout.write(json_text(cfg.resolved()))
            if args.out is not None:
                emit(cfg.resolved(), "json", args.out / "resolved_config.json")
            return EXIT_OK
        if args.out is None:
            raise ConfigError("--out: required for this command")
        outcome = execute(args.command, cfg, args.out, args.refine, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in outcome.artifacts:
        print(path)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
