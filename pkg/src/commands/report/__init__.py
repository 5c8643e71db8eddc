"""
Merge several run reports into one.

Usage:
    couplingcheck report --merge out/brownian/report.json out/walk50/report.json [--out FILE]

Options:
    --merge FILE [FILE ...]   Run reports written by check, solve or trace
    --out FILE                Where the merged report goes (default: stdout)
    --log-level LEVEL         DEBUG, INFO, WARNING or ERROR

Exit Codes:
    0 - Every merged report passed
    1 - At least one merged report failed
    2 - A report could not be read or is not a run report
"""

from __future__ import annotations

import argparse
import hashlib
import logging
from datetime import datetime, timezone
from pathlib import Path

from pydantic import ValidationError

from commands.common import (
    EXIT_FAILED,
    EXIT_OK,
    InputError,
    environment,
    guarded,
    print_summary,
    write_report,
)
from shared.schemas.reports import CheckReport, RunReport

logger = logging.getLogger(__name__)


def load_report(path: str | Path) -> tuple[RunReport, bytes]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return RunReport.model_validate_json(raw), raw
    except ValidationError as exc:
        raise InputError(f"{path} is not a run report ({exc.error_count()} errors)") from exc


def merge_reports(reports: list[RunReport], raws: list[bytes]) -> RunReport:
    """
    One report whose checks are the merged reports, each folded into a single entry.

    The merged report passes iff every input passed; the input hash covers all inputs.
    """

    digest = hashlib.sha256()
    for raw in raws:
        digest.update(hashlib.sha256(raw).digest())
    checks = [
        CheckReport.from_items(
            f"{r.command}:{r.document}",
            r.checks,
            constants={"seed": r.seed, "input_hash": r.input_hash},
        )
        for r in reports
    ]
    starts = [r.started_at for r in reports if r.started_at is not None]
    merged = RunReport(
        command="report",
        document=",".join(r.document for r in reports),
        input_hash=digest.hexdigest(),
        environment=environment(),
        seed=reports[0].seed if reports else 0,
        started_at=min(starts) if starts else None,
        finished_at=datetime.now(timezone.utc),
        summary={"merged": len(reports), "failed": [c.name for c in checks if not c.passed]},
        checks=checks,
    )
    return merged.model_copy(update={"passed": merged.all_passed()})


def build_parser(parser: argparse.ArgumentParser | None = None) -> argparse.ArgumentParser:
    parser = parser or argparse.ArgumentParser(
        description="Merge run reports",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--merge", nargs="+", required=True, metavar="FILE")
    parser.add_argument("--out", default=None, help="Merged report path (default: stdout)")
    parser.add_argument(
        "--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"]
    )
    return parser


def run(args: argparse.Namespace) -> int:
    loaded = [load_report(path) for path in args.merge]
    merged = merge_reports([r for r, _ in loaded], [raw for _, raw in loaded])
    logger.info("merged reports=%s passed=%s", len(loaded), merged.passed)
    if args.out:
        path = write_report(merged, Path(args.out))
        print_summary(merged)
        print(f"report: {path}")
    else:
        print(merged.model_dump_json(indent=2))
    return EXIT_OK if merged.passed else EXIT_FAILED


def main(argv: list[str] | None = None) -> int:
    return guarded(run, build_parser().parse_args(argv))
