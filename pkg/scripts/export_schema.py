"""
Write the JSON schema of the problem document into the repository.

Usage:
    python scripts/export_schema.py [--out schema/problem.schema.json] [--check]

Options:
    --out FILE   Target file (default: schema/problem.schema.json)
    --check      Do not write; exit 1 if the file on disk is out of date

Exit Codes:
    0 - Schema written (or up to date with --check)
    1 - The shipped schema differs from the models (--check)
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from commands.schema import render_schema

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    parser = argparse.ArgumentParser(description="Export the problem document schema")
    parser.add_argument("--out", default=str(ROOT / "schema" / "problem.schema.json"))
    parser.add_argument("--check", action="store_true")
    args = parser.parse_args()

    target = Path(args.out)
    text = render_schema()
    if args.check:
        current = target.read_text(encoding="utf-8") if target.exists() else ""
        if current != text:
            print(f"{target} is out of date; run scripts/export_schema.py")
            return 1
        print(f"{target} is up to date")
        return 0
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
