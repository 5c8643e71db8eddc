"""
Run the doubling construction of a document across an α schedule.

Usage:
    couplingcheck trace problems/drift_walk.json [OPTIONS]

Options:
    --schedule A,B,...    Comma-separated α values overriding the document schedule
    --seed N              Override the document seed
    --out-dir DIR         Where trace.csv, summary.json and the run report are written
    --tolerance-scale S   Multiply every check tolerance
    --log-level LEVEL     DEBUG, INFO, WARNING or ERROR

Exit Codes:
    0 - Every row invariant and the limit checks held
    1 - An invariant failed or the construction aborted
    2 - The document has no doubling section, or the input is invalid
"""

from __future__ import annotations

import argparse
import logging

from commands.common import (
    EXIT_FAILED,
    EXIT_OK,
    InputError,
    add_common_arguments,
    assemble,
    building,
    finish_report,
    first_failure,
    guarded,
    load_document,
    new_report,
    output_dir,
    print_summary,
    write_report,
)
from shared.config import get_settings
from shared.numerics.doubling import run_trace
from shared.schemas.trace import write_trace_csv

logger = logging.getLogger(__name__)


def parse_schedule(text: str | None) -> list[float] | None:
    if text is None:
        return None
    try:
        alphas = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise InputError(f"--schedule must be comma-separated numbers: {text!r}") from exc
    if not alphas:
        raise InputError("--schedule is empty")
    if any(a <= 1.0 for a in alphas):
        raise InputError("every α of --schedule must exceed 1")
    if any(b <= a for a, b in zip(alphas, alphas[1:], strict=False)):
        raise InputError("--schedule must be strictly increasing")
    return alphas


def build_parser(parser: argparse.ArgumentParser | None = None) -> argparse.ArgumentParser:
    parser = parser or argparse.ArgumentParser(
        description="Run the doubling construction of a document",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("document", help="Path to the problem document (JSON)")
    parser.add_argument("--schedule", default=None, help="Comma-separated α values")
    add_common_arguments(parser)
    return parser


def run(args: argparse.Namespace) -> int:
    settings = get_settings()
    schedule = parse_schedule(args.schedule)
    doc, raw = load_document(args.document)
    if doc.doubling is None:
        raise InputError(f"{args.document} has no doubling section")
    a = assemble(doc, args)
    schedule = schedule or doc.doubling.schedule
    report = new_report("trace", args.document, raw, a.seed)

    prob = building("doubling", lambda: a.doubling)
    trace = run_trace(prob, schedule, settings.CHECK_THREADS)
    assert trace.report is not None and trace.summary is not None

    target = output_dir(args, doc, settings)
    csv_path = write_trace_csv(trace.rows, target / doc.output.trace_csv)
    summary_path = target / doc.output.summary
    summary_path.write_text(trace.summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    report = finish_report(
        report.model_copy(update={"checks": [trace.report]}),
        rows=len(trace.rows),
        trace_csv=csv_path.name,
        summary=summary_path.name,
    )
    path = write_report(report, target / doc.output.report)
    print_summary(report)
    failed = first_failure(trace.report)
    if failed:
        print(f"first failure: {failed}")
    print(f"trace: {csv_path}")
    print(f"report: {path}")
    return EXIT_OK if report.passed else EXIT_FAILED


def main(argv: list[str] | None = None) -> int:
    return guarded(run, build_parser().parse_args(argv))
