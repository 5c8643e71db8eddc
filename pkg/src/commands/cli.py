"""
Command-line front door.

Usage:
    couplingcheck check <document> [--seed N] [--out-dir DIR] [--tolerance-scale S]
    couplingcheck solve <document> [--seed N] [--out-dir DIR] [--tolerance-scale S]
    couplingcheck trace <document> [--schedule A,B,...] [--seed N] [--out-dir DIR]
    couplingcheck report --merge <report> [<report> ...] [--out FILE]
    couplingcheck schema [--out FILE]

Exit Codes:
    0 - Everything passed
    1 - A check or diagnostic failed, or a numeric run aborted
    2 - Invalid input (document, arguments or report files)
"""

from __future__ import annotations

import argparse
import sys

from commands import check, report, schema, solve, trace
from commands.common import EXIT_INPUT, guarded

COMMANDS = {
    "check": (check, "Run the checks declared by a document"),
    "solve": (solve, "Solve the resolvent problem and verify the estimates"),
    "trace": (trace, "Run the doubling construction across an α schedule"),
    "report": (report, "Merge run reports"),
    "schema": (schema, "Print the problem document JSON schema"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="couplingcheck",
        description="Numerical verification of coupling-based comparison principles",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (module, help_text) in COMMANDS.items():
        module.build_parser(sub.add_parser(name, help=help_text, description=help_text))
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage and 0 on --help
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    module, _ = COMMANDS[args.command]
    return guarded(module.run, args)


if __name__ == "__main__":
    sys.exit(main())
