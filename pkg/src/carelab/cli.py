"""Command-line entry point.

Exit status: 0 on success, 1 for invalid configuration or input files, 2 for
failures while running.  ``CARELAB_LOG_LEVEL`` sets log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .harness import PIPELINES, ConfigError, load_config, run
from .io import SchemaError

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


class _Parser(argparse.ArgumentParser):
    # Bad flags are validation errors, not argparse's default status 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="carelab",
        description="Household care model simulator and staggered DiD estimators.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in PIPELINES:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--seed", type=_u64, help="override experiment.seed")
        p.add_argument("--out", help="output directory (overrides experiment.out)")
        p.add_argument("--jobs", type=_positive, help="worker processes")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("CARELAB_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    log = logging.getLogger("carelab")
    try:
        cfg = load_config(args.config, seed=args.seed, jobs=args.jobs, out=args.out,
                          pipeline=args.command)
        run(cfg)
    except (ConfigError, SchemaError) as exc:
        print(f"carelab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.debug("run failed", exc_info=True)
        print(f"carelab: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
