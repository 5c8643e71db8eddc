"""
Plumbing shared by the batch commands: document loading, run reports and output paths.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from collections.abc import Callable
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
import scipy
from pydantic import ValidationError

from shared.assembly import Assembly
from shared.config import Settings, configure_logging, get_settings
from shared.numerics.errors import ExpressionError, NumericsError
from shared.schemas.document import ProblemDocument
from shared.schemas.reports import CheckReport, CheckStatus, Environment, RunReport, to_jsonable

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


class InputError(Exception):
    """
    A document or argument problem that maps to exit code 2.
    """


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Override the document seed")
    parser.add_argument(
        "--out-dir", default=None, help="Output directory (default: OUTPUT_DIR setting)"
    )
    parser.add_argument(
        "--tolerance-scale",
        type=float,
        default=None,
        help="Multiply every check tolerance (default: TOLERANCE_SCALE setting)",
    )
    parser.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Log level (default: LOG_LEVEL setting)",
    )


def load_document(path: str | Path) -> tuple[ProblemDocument, bytes]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc.msg} (line {exc.lineno})") from exc
    except UnicodeDecodeError as exc:
        raise InputError(f"{path} is not UTF-8 text") from exc
    return ProblemDocument.model_validate(data), raw


def input_hash(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def environment() -> Environment:
    return Environment(
        python=platform.python_version(),
        numpy=np.__version__,
        scipy=scipy.__version__,
        platform=platform.platform(),
    )


def assemble(doc: ProblemDocument, args: argparse.Namespace) -> Assembly:
    if args.tolerance_scale is not None and not args.tolerance_scale > 0:
        raise InputError("--tolerance-scale must be positive")
    if args.seed is not None and args.seed < 0:
        raise InputError("--seed must be nonnegative")
    return Assembly.from_document(doc, seed=args.seed, tolerance_scale=args.tolerance_scale)


def building(what: str, build: Callable[[], Any]) -> Any:
    """
    Construct a numeric object from document data; bad data becomes an input error.

    The input-flavoured numeric errors (non-finite field values, dimension mismatches,
    malformed measures) are ValueErrors and land here too.
    """

    try:
        return build()
    except ValueError as exc:
        raise InputError(f"{what}: {exc}") from exc


def output_dir(args: argparse.Namespace, doc: ProblemDocument, settings: Settings) -> Path:
    base = Path(args.out_dir or doc.output.dir or settings.OUTPUT_DIR)
    target = base / doc.name
    target.mkdir(parents=True, exist_ok=True)
    return target


def new_report(command: str, path: str | Path, raw: bytes, seed: int) -> RunReport:
    return RunReport(
        command=command,
        document=Path(path).name,
        input_hash=input_hash(raw),
        environment=environment(),
        seed=seed,
        started_at=datetime.now(timezone.utc),
    )


def finish_report(report: RunReport, **summary: Any) -> RunReport:
    return report.model_copy(
        update={
            "finished_at": datetime.now(timezone.utc),
            "passed": report.all_passed(),
            "summary": to_jsonable({**report.summary, **summary}),
        }
    )


def write_report(report: RunReport, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def first_failure(report: CheckReport) -> str | None:
    """
    Dotted name of the first failing leaf item, depth first.
    """

    if report.passed:
        return None
    for item in report.items:
        inner = first_failure(item)
        if inner is not None:
            return f"{report.name}.{inner}"
    return report.name


def print_summary(report: RunReport) -> None:
    for check in report.checks:
        status = check.status.value.upper()
        line = f"  [{status}] {check.name}"
        if check.status == CheckStatus.FAIL:
            line += f" (violation {check.max_violation:.3g})"
            failed = first_failure(check)
            if failed and failed != check.name:
                line += f" first failure: {failed}"
        print(line)
    print(
        f"{report.command}: {report.passed_count()} passed, {report.failed_count()} failed"
        f" -> {'PASS' if report.passed else 'FAIL'}"
    )


def _error_path(loc: tuple[Any, ...]) -> str:
    return ".".join(str(part) for part in loc) or "<document>"


def _plain_name(value: Any, default: str) -> str:
    if isinstance(value, str) and value and Path(value).name == value:
        return value
    return default


def _peek_document(path: Path) -> tuple[bytes, dict[str, Any]]:
    try:
        raw = path.read_bytes()
    except OSError:
        return b"", {}
    try:
        data = json.loads(raw)
    except ValueError:
        return raw, {}
    return raw, data if isinstance(data, dict) else {}


def failure_report(
    command: str, args: argparse.Namespace, kind: str, errors: list[dict[str, str]]
) -> tuple[RunReport, Path | None]:
    """
    A failed run report for a run that never produced checks, and where it belongs.

    The target follows the document as far as it can be read: its `name`, `output.dir`
    and `output.report`, else the file stem and the defaults. Commands without a
    document have no target.
    """

    settings = get_settings()
    document = getattr(args, "document", None)
    raw, data = _peek_document(Path(document)) if document else (b"", {})
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = data.get("seed") if isinstance(data.get("seed"), int) else settings.DEFAULT_SEED
    now = datetime.now(timezone.utc)
    report = RunReport(
        command=command,
        document=Path(document).name if document else "",
        input_hash=input_hash(raw),
        environment=environment(),
        seed=seed,
        passed=False,
        started_at=now,
        finished_at=now,
        summary={"error": kind, "errors": errors},
    )
    if not document:
        return report, None
    output = data.get("output") if isinstance(data.get("output"), dict) else {}
    out_dir = output.get("dir") if isinstance(output.get("dir"), str) else None
    base = Path(getattr(args, "out_dir", None) or out_dir or settings.OUTPUT_DIR)
    name = _plain_name(data.get("name"), Path(document).stem)
    return report, base / name / _plain_name(output.get("report"), "report.json")


def _record_failure(
    command: str, args: argparse.Namespace, kind: str, errors: list[dict[str, str]]
) -> None:
    try:
        report, path = failure_report(command, args, kind, errors)
        if path is None:
            print(report.model_dump_json(indent=2))
            return
        write_report(report, path)
    except (OSError, ValidationError) as exc:
        logger.warning("could not write the failure report error=%s", exc)
        return
    print(f"report: {path}")


def guarded(run: Callable[[argparse.Namespace], int], args: argparse.Namespace) -> int:
    """
    Run a command and map input problems to exit 2 and numeric aborts to exit 1.

    Either way a failed run report records what went wrong.
    """

    configure_logging(args.log_level)
    command = getattr(args, "command", None) or run.__module__.rsplit(".", 1)[-1]
    try:
        return run(args)
    except ValidationError as exc:
        errors = [{"path": _error_path(e["loc"]), "message": e["msg"]} for e in exc.errors()]
        for error in errors:
            print(f"input error at {error['path']}: {error['message']}", file=sys.stderr)
        _record_failure(command, args, "input", errors)
        return EXIT_INPUT
    except (InputError, ExpressionError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        _record_failure(command, args, "input", [{"path": "", "message": str(exc)}])
        return EXIT_INPUT
    except NumericsError as exc:
        logger.exception("run aborted: %s", exc)
        errors = [{"path": type(exc).__name__, "message": str(exc)}]
        _record_failure(command, args, "aborted", errors)
        return EXIT_FAILED
