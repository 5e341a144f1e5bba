"""``multitab <command> --config <path> [--out <dir>]``.

Exit codes: 0 success, 2 config validation, 3 numeric failure, 4 tolerance
failure, 1 anything else.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import configs
from .commands import COMMAND_TABLE
from .errors import ConfigError, NumericFailure, ToleranceFailure

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TOLERANCE = 0, 1, 2, 3, 4

log = logging.getLogger("multitab")


def build_parser():
    parser = argparse.ArgumentParser(prog="multitab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in configs.COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--out", help="output directory (overrides the config's 'out')")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(command, config_path, out=None):
    """Load, validate and execute one command; returns its report."""
    cmd, doc = configs.load(config_path, command)
    if cmd != command:
        raise ConfigError(f"config is for {cmd!r}, invoked as {command!r}", "/command")
    out = out or doc.get("out")
    if not out:
        raise ConfigError("no output directory: pass --out or set 'out'", "/out")
    return COMMAND_TABLE[command](doc, out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args.command, args.config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ToleranceFailure as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except Exception as exc:  # noqa: BLE001 - surfaced as exit status 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
