"""Command line entry point: ``blowlab <subcommand> --config FILE [--set k=v]... --out DIR``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import KINDS, ConfigError, effective_config, load_config
from .runner import run_experiment

log = logging.getLogger("blowlab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blowlab", description="Semilinear heat equation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", help="JSON config file (defaults are used for missing keys)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a dotted config key")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = effective_config(args.command, load_config(args.config), args.set)
    except (ConfigError, OSError) as err:
        print(f"blowlab: config error: {err}", file=sys.stderr)
        return 2
    manifest = run_experiment(cfg, args.out)
    with open(f"{args.out}/report.txt") as fh:
        sys.stdout.write(fh.read())
    return 0 if manifest["summary"]["all_passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
