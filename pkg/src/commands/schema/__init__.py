"""
Print the JSON schema of the problem document.

Usage:
    couplingcheck schema [--out FILE]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import Any

from commands.common import EXIT_OK, guarded
from shared.schemas.document import ProblemDocument


def problem_schema() -> dict[str, Any]:
    return ProblemDocument.model_json_schema()


def render_schema() -> str:
    return json.dumps(problem_schema(), indent=2, ensure_ascii=False) + "\n"


def build_parser(parser: argparse.ArgumentParser | None = None) -> argparse.ArgumentParser:
    parser = parser or argparse.ArgumentParser(description="Print the problem document schema")
    parser.add_argument("--out", default=None, help="Write the schema here instead of stdout")
    parser.add_argument(
        "--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"]
    )
    return parser


def run(args: argparse.Namespace) -> int:
    text = render_schema()
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        print(f"schema: {path}")
    else:
        print(text, end="")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    return guarded(run, build_parser().parse_args(argv))
