"""
Solve the resolvent problem of a document and verify the comparison estimates.

Usage:
    couplingcheck solve problems/walk50.json [OPTIONS]

Options:
    --seed N              Override the document seed
    --out-dir DIR         Where solution.csv and the run report are written
    --tolerance-scale S   Multiply every check tolerance
    --log-level LEVEL     DEBUG, INFO, WARNING or ERROR

Exit Codes:
    0 - Solved and every estimate held
    1 - An estimate failed or the solver aborted
    2 - The document has no resolvent section or is invalid
"""

from __future__ import annotations

import argparse
import csv
import logging
from pathlib import Path

import numpy as np

from commands.common import (
    EXIT_FAILED,
    EXIT_OK,
    InputError,
    add_common_arguments,
    assemble,
    building,
    finish_report,
    guarded,
    load_document,
    new_report,
    output_dir,
    print_summary,
    write_report,
)
from shared.assembly import Assembly, localized_pairs, random_pairs
from shared.config import get_settings
from shared.numerics.errors import IsaacsError
from shared.numerics.resolvent import (
    FiniteProblem,
    Order,
    ResolventSolution,
    check_resolvent_identity,
    solve,
    verify_contraction,
    verify_strict_estimate,
)
from shared.schemas.reports import CheckReport, CheckStatus

logger = logging.getLogger(__name__)


def _solution_item(name: str, p: FiniteProblem, sol: ResolventSolution) -> CheckReport:
    return CheckReport(
        name=name,
        status=CheckStatus.PASS,
        constants={
            "residual": sol.residual,
            "method": sol.method,
            "iterations": sol.iterations,
            "isaacs_gap": sol.isaacs_gap,
            "sup_abs_f": float(np.max(np.abs(sol.f))),
            "states": p.n,
        },
        notes=list(p.notes),
    )


def _solve_item(
    name: str, p: FiniteProblem, order: Order
) -> tuple[CheckReport, ResolventSolution | None]:
    try:
        sol = solve(p, order)
    except IsaacsError as exc:
        try:
            gap = max(p.isaacs_gap(np.zeros(p.n)), p.isaacs_gap(p.h))
        except IsaacsError:
            gap = 0.0
        item = CheckReport(
            name=name,
            status=CheckStatus.FAIL,
            message=str(exc),
            max_violation=max(gap, 0.0),
            constants={"states": p.n, "controls": list(p.shape)},
        )
        return item, None
    return _solution_item(name, p, sol), sol


def write_solution_csv(
    path: Path,
    states: np.ndarray,
    f1: np.ndarray,
    h1: np.ndarray,
    f2: np.ndarray | None = None,
    h2: np.ndarray | None = None,
) -> Path:
    """
    One row per state: coordinates x1..xq, then f1, f2, h1, h2 (empty when absent).
    """

    path.parent.mkdir(parents=True, exist_ok=True)
    q = states.shape[1]
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(q)] + ["f1", "f2", "h1", "h2"])
        for k, x in enumerate(states):
            writer.writerow(
                [repr(float(c)) for c in x]
                + [
                    repr(float(f1[k])),
                    "" if f2 is None else repr(float(f2[k])),
                    repr(float(h1[k])),
                    "" if h2 is None else repr(float(h2[k])),
                ]
            )
    return path


def _strict_items(a: Assembly, p: FiniteProblem, threads: int) -> list[CheckReport]:
    section = a.doc.resolvent
    assert section is not None
    strict = section.strict
    if strict is None:
        return []
    states = p.states
    V = a.containment.V.values(states)
    K = np.flatnonzero(np.linalg.norm(states, axis=1) <= strict.k_radius)
    if K.size == 0:
        raise InputError(f"no state lies within k_radius {strict.k_radius}")
    seed = strict.seed if strict.seed is not None else a.seed
    pairs = localized_pairs(states, strict.pairs, seed, strict.perturbation_radius)
    items = []
    for eps in strict.eps:
        report = verify_strict_estimate(p, V, K, eps, pairs, threads, section.order)
        items.append(report.model_copy(update={"name": f"eps={eps:g}"}))
    return items


def build_parser(parser: argparse.ArgumentParser | None = None) -> argparse.ArgumentParser:
    parser = parser or argparse.ArgumentParser(
        description="Solve the resolvent problem of a document",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("document", help="Path to the problem document (JSON)")
    add_common_arguments(parser)
    return parser


def run(args: argparse.Namespace) -> int:
    settings = get_settings()
    doc, raw = load_document(args.document)
    if doc.resolvent is None:
        raise InputError(f"{args.document} has no resolvent section")
    section = doc.resolvent
    a = assemble(doc, args)
    threads = settings.CHECK_THREADS
    report = new_report("solve", args.document, raw, a.seed)

    p, grid = building("resolvent", lambda: a.finite)
    logger.info(
        "resolvent states=%s controls=%s lam=%s leaking_rows=%s",
        p.n,
        p.shape,
        p.lam,
        p.leaking_rows,
    )
    item1, sol1 = _solve_item("solve_h1", p, section.order)
    checks = [item1]
    h2 = f2 = None
    if sol1 is not None and section.h2 is not None:
        h2 = building("resolvent.h2", lambda: a.h_vector(section.h2))
        item2, sol2 = _solve_item("solve_h2", p.with_h(h2), section.order)
        checks.append(item2)
        f2 = sol2.f if sol2 is not None else None

    target = output_dir(args, doc, settings)
    if sol1 is None or (h2 is not None and f2 is None):
        # the estimates below all solve the same game again
        report = finish_report(report.model_copy(update={"checks": checks}), states=p.n)
        path = write_report(report, target / doc.output.report)
        print_summary(report)
        print(f"report: {path}")
        return EXIT_FAILED

    contraction = section.contraction
    if contraction.pairs:
        seed = contraction.seed if contraction.seed is not None else a.seed
        pairs = random_pairs(p.n, contraction.pairs, seed, contraction.scale)
        checks.append(verify_contraction(p, pairs, threads, section.order))

    strict = _strict_items(a, p, threads)
    if strict:
        checks.append(CheckReport.from_items("strict_estimate", strict))

    if section.identity_mu is not None:
        checks.append(check_resolvent_identity(p, p.lam, section.identity_mu, p.h, section.order))

    solution = write_solution_csv(target / doc.output.solution, p.states, sol1.f, p.h, f2, h2)
    report = finish_report(
        report.model_copy(update={"checks": checks}),
        states=p.n,
        grid=grid.as_dict() if grid is not None else None,
        sup_abs_f1=float(np.max(np.abs(sol1.f))),
        solution=solution.name,
    )
    path = write_report(report, target / doc.output.report)
    print_summary(report)
    print(f"solution: {solution}")
    print(f"report: {path}")
    return EXIT_OK if report.passed else EXIT_FAILED


def main(argv: list[str] | None = None) -> int:
    return guarded(run, build_parser().parse_args(argv))
