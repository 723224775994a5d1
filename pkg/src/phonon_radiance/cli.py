"""Command-line front end: ``phonon-radiance <subcommand> [--config F] [--out D] [--set k=v ...]``."""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments
from .errors import ValidationError

SUBCOMMANDS = ("band", "corr", "decay", "subradiance", "lindblad", "dicke", "grouped", "feasibility")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file merged over the defaults")
    p.add_argument("--out", help="output directory (overrides the config's output key)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key with dotted path, e.g. waveguide.nonlinearity=4")
    p.add_argument("--quiet", action="store_true", help="do not print the summary")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phonon-radiance", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        _common(sub.add_parser(name, help=f"run the {name} experiment"))
    rep = sub.add_parser("reproduce", help="regenerate the data behind one figure")
    rep.add_argument("figure", choices=experiments.FIGURES)
    _common(rep)
    return parser


def _fail(kind: str, message: str, code: int, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = experiments.load_config(args.config, args.overrides)
        config["experiment"] = args.command
        if args.command == "reproduce":
            config["figure"] = args.figure
        manifest = experiments.run(config, args.out)
    except ValidationError as exc:
        return _fail("validation", str(exc), 2, invariant=exc.invariant)
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        return _fail(type(exc).__name__, str(exc), 1)
    if not args.quiet:
        sys.stdout.write(json.dumps({"status": manifest["status"], "files": sorted(manifest["files"]),
                                     "warnings": manifest["warnings"]}, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
