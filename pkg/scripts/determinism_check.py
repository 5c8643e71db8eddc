"""
Determinism check for the bundled problem documents.

Runs ``check`` and ``trace`` twice on every bundled document and compares the run
reports with their timing members removed. Any difference means a result depends on
something other than the document and its seeds.

Usage:
    python scripts/determinism_check.py [OPTIONS]

Options:
    --problems DIR      Directory of problem documents (default: problems/)
    --work-dir DIR      Scratch directory for the two runs (default: a temp dir)
    --verbose           Log at DEBUG

Exit Codes:
    0 - Every report was byte-identical across the two runs
    1 - At least one report differed
    2 - A document could not be run (missing directory, input error)
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path

from commands.check import main as check_main
from commands.common import EXIT_INPUT
from commands.trace import main as trace_main
from shared.schemas.reports import strip_timing

ROOT = Path(__file__).resolve().parents[1]

logger = logging.getLogger("determinism_check")

COMMANDS = {"check": check_main, "trace": trace_main}


def _normalized(path: Path) -> str:
    payload = json.loads(path.read_text(encoding="utf-8"))
    return json.dumps(strip_timing(payload), indent=2, sort_keys=False)


def _run_twice(command: str, document: Path, work: Path) -> tuple[str, str] | None:
    outputs = []
    for attempt in ("a", "b"):
        out_dir = work / attempt / command
        code = COMMANDS[command]([str(document), "--out-dir", str(out_dir)])
        if code == EXIT_INPUT:
            logger.error("input error command=%s document=%s", command, document.name)
            return None
        reports = sorted(out_dir.rglob("report.json"))
        if not reports:
            logger.error("no report command=%s document=%s", command, document.name)
            return None
        outputs.append(_normalized(reports[0]))
    return outputs[0], outputs[1]


def _applicable(command: str, document: Path) -> bool:
    data = json.loads(document.read_text(encoding="utf-8"))
    if command == "trace":
        return data.get("doubling") is not None
    return bool(data.get("checks"))


def main() -> int:
    parser = argparse.ArgumentParser(description="Double-run determinism check")
    parser.add_argument("--problems", default=str(ROOT / "problems"))
    parser.add_argument("--work-dir", default=None)
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args()

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s - %(message)s",
    )
    problems = Path(args.problems)
    documents = sorted(problems.glob("*.json"))
    if not documents:
        logger.error("no documents found dir=%s", problems)
        return 2

    with tempfile.TemporaryDirectory() as scratch:
        work = Path(args.work_dir or scratch)
        differing: list[str] = []
        for document in documents:
            for command in COMMANDS:
                if not _applicable(command, document):
                    continue
                pair = _run_twice(command, document, work / document.stem)
                if pair is None:
                    return 2
                same = pair[0] == pair[1]
                print(f"  [{'SAME' if same else 'DIFF'}] {command} {document.name}")
                if not same:
                    differing.append(f"{command}:{document.name}")

    if differing:
        print(f"non-deterministic: {', '.join(differing)}")
        return 1
    print("all reports deterministic")
    return 0


if __name__ == "__main__":
    sys.exit(main())
