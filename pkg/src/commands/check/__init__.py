"""
Run the hypothesis checks a problem document declares.

Usage:
    couplingcheck check problems/brownian.json [OPTIONS]

Options:
    --seed N              Override the document seed
    --out-dir DIR         Where the run report is written
    --tolerance-scale S   Multiply every check tolerance
    --log-level LEVEL     DEBUG, INFO, WARNING or ERROR

Exit Codes:
    0 - All declared checks passed (warnings and skips count as passing)
    1 - One or more checks failed
    2 - The document or the arguments are invalid
"""

from __future__ import annotations

import argparse
import logging
import time
from collections.abc import Callable

import numpy as np

from commands.common import (
    EXIT_FAILED,
    EXIT_OK,
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
from shared.assembly import Assembly, build_cloud
from shared.config import get_settings
from shared.numerics.convolve import check_convolution_laws
from shared.numerics.couplings import (
    check_controlled_growth,
    check_coupling_identity,
    check_coupling_max_principle,
    check_distance_increment_bound,
    check_pi_lipschitz,
)
from shared.numerics.funcspace import quadratic_field
from shared.numerics.operators import (
    IsaacsOp,
    JumpOp,
    bump_field,
    check_isaacs,
    check_maximum_principle,
    check_measure_family,
    check_semi_monotone,
    drift_parts,
    lyapunov_bound,
)
from shared.numerics.penalty import certify_family, check_containment_jump_bounds
from shared.schemas.document import CheckEntry
from shared.schemas.reports import CheckReport, CheckStatus

logger = logging.getLogger(__name__)

BUMP_CLOUD = {"kind": "ball", "radius": 2.0, "count": 5}


def _skip(name: str, reason: str) -> CheckReport:
    return CheckReport(name=name, status=CheckStatus.SKIP, message=reason)


def _combine(name: str, reports: list[CheckReport]) -> CheckReport:
    if len(reports) == 1:
        return reports[0].model_copy(update={"name": name})
    return CheckReport.from_items(name, reports)


def _semi_monotone(a: Assembly, entry: CheckEntry) -> CheckReport:
    drifts = drift_parts(a.op)
    if not drifts:
        return _skip(entry.name, "no drift leaves")
    K = a.cloud(entry.cloud)
    return _combine(
        entry.name,
        [check_semi_monotone(d, K, entry.alphas, entry.tolerance_scale) for d in drifts],
    )


def _isaacs(a: Assembly, entry: CheckEntry) -> CheckReport:
    if not isinstance(a.op, IsaacsOp):
        return _skip(entry.name, "operator has no Isaacs node")
    K = a.cloud(entry.cloud)
    centers = K.points[: min(3, len(K))]
    f = bump_field(centers, np.array([1.0, -1.0, 0.5])[: len(centers)])
    return check_isaacs(a.op, f, K, entry.tolerance_scale)


def _coupling_identity(a: Assembly, entry: CheckEntry) -> CheckReport:
    if a.coupling is None:
        return _skip(entry.name, "Isaacs operators are not coupled as a whole")
    f1 = quadratic_field(np.full(a.dim, 0.5))
    f2 = bump_field(np.zeros((1, a.dim)), np.ones(1))
    return check_coupling_identity(
        a.coupling, f1, f2, a.cloud(entry.cloud, factor=2), entry.tolerance_scale
    )


def _controlled_growth(a: Assembly, entry: CheckEntry) -> CheckReport:
    if a.coupling is None:
        return _skip(entry.name, "Isaacs operators are not coupled as a whole")
    return check_controlled_growth(
        a.coupling, a.cloud(entry.cloud, factor=4), entry.alphas, entry.tolerance_scale
    )


def _pi_lipschitz(a: Assembly, entry: CheckEntry) -> CheckReport:
    leaves = a.coupling.jump_leaves() if a.coupling is not None else []
    if not leaves:
        return _skip(entry.name, "no coupled jump measures")
    K = a.cloud(entry.cloud, factor=2)
    items = []
    for leaf in leaves:
        L = check_pi_lipschitz(leaf.pi, K)
        finite = bool(np.isfinite(L))
        items.append(
            CheckReport(
                name=leaf.base.label,
                status=CheckStatus.PASS if finite else CheckStatus.FAIL,
                message="" if finite else "transport cost diverges as pairs coalesce",
                constants={"L_pi": L},
            )
        )
    return _combine(entry.name, items)


def _lyapunov(a: Assembly, entry: CheckEntry) -> CheckReport:
    return lyapunov_bound(a.op, a.containment.V, a.cloud(entry.cloud), entry.levels).report()


def _penalty(a: Assembly, entry: CheckEntry) -> CheckReport:
    return certify_family(a.family, a.cloud(entry.cloud), entry.tolerance_scale)


def _measure_family(a: Assembly, entry: CheckEntry) -> CheckReport:
    leaves = [leaf for leaf in a.op.leaves() if isinstance(leaf, JumpOp)]
    if not leaves:
        return _skip(entry.name, "no jump leaves")
    K = a.cloud(entry.cloud)
    return _combine(
        entry.name,
        [
            check_measure_family(leaf.mu, K, leaf.cut, entry.mass_bound, entry.tolerance_scale)
            for leaf in leaves
        ],
    )


def _maximum_principle(a: Assembly, entry: CheckEntry) -> CheckReport:
    bumps = build_cloud(dict(BUMP_CLOUD), a.dim, a.seed)
    return check_maximum_principle(a.op, a.cloud(entry.cloud), bumps, entry.tolerance_scale)


def _coupling_max_principle(a: Assembly, entry: CheckEntry) -> CheckReport:
    if a.coupling is None:
        return _skip(entry.name, "Isaacs operators are not coupled as a whole")
    bumps = build_cloud(dict(BUMP_CLOUD), 2 * a.dim, a.seed)
    return check_coupling_max_principle(
        a.coupling, a.cloud(entry.cloud, factor=2), bumps, entry.tolerance_scale
    )


def _containment(a: Assembly, entry: CheckEntry) -> CheckReport:
    return a.containment.certify(a.cloud(entry.cloud), entry.tolerance_scale)


def _convolution_laws(a: Assembly, entry: CheckEntry) -> CheckReport:
    if a.doc.doubling is None:
        return _skip(entry.name, "no doubling section supplies u and v")
    prob = a.doubling
    points = a.cloud(entry.cloud) if entry.cloud is not None else prob.K
    return check_convolution_laws(
        prob.u, prob.v, entry.alphas, points, prob.cloud, entry.tolerance_scale
    )


def _containment_jump_bounds(a: Assembly, entry: CheckEntry) -> CheckReport:
    seed = entry.seed if entry.seed is not None else a.seed
    return check_containment_jump_bounds(entry.samples, seed, a.dim)


def _distance_increment_bound(a: Assembly, entry: CheckEntry) -> CheckReport:
    seed = entry.seed if entry.seed is not None else a.seed
    return check_distance_increment_bound(
        entry.samples, seed, a.dim, tolerance=1e-10 * entry.tolerance_scale
    )


CHECKS: dict[str, Callable[[Assembly, CheckEntry], CheckReport]] = {
    "semi_monotone": _semi_monotone,
    "isaacs": _isaacs,
    "coupling_identity": _coupling_identity,
    "controlled_growth": _controlled_growth,
    "pi_lipschitz": _pi_lipschitz,
    "lyapunov": _lyapunov,
    "penalty": _penalty,
    "measure_family": _measure_family,
    "maximum_principle": _maximum_principle,
    "coupling_max_principle": _coupling_max_principle,
    "containment": _containment,
    "convolution_laws": _convolution_laws,
    "containment_jump_bounds": _containment_jump_bounds,
    "distance_increment_bound": _distance_increment_bound,
}


def run_check(a: Assembly, entry: CheckEntry) -> CheckReport:
    start = time.perf_counter()
    scale = entry.tolerance_scale * a.tolerance_scale
    scaled = entry.model_copy(update={"tolerance_scale": scale})
    report = CHECKS[entry.name](a, scaled)
    update: dict[str, object] = {"name": entry.name}
    if not report.runtime_ms:
        update["runtime_ms"] = (time.perf_counter() - start) * 1000.0
    report = report.model_copy(update=update)
    if report.passed:
        logger.info("check name=%s status=%s", entry.name, report.status.value)
    else:
        logger.warning(
            "check failed name=%s max_violation=%s", entry.name, report.max_violation
        )
    return report


def build_parser(parser: argparse.ArgumentParser | None = None) -> argparse.ArgumentParser:
    parser = parser or argparse.ArgumentParser(
        description="Run the checks declared by a problem document",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("document", help="Path to the problem document (JSON)")
    add_common_arguments(parser)
    return parser


def run(args: argparse.Namespace) -> int:
    settings = get_settings()
    doc, raw = load_document(args.document)
    a = assemble(doc, args)
    report = new_report("check", args.document, raw, a.seed)
    checks = [
        building(f"check {entry.name}", lambda e=entry: run_check(a, e)) for entry in doc.checks
    ]
    report = finish_report(report.model_copy(update={"checks": checks}), checks=len(checks))
    path = write_report(report, output_dir(args, doc, settings) / doc.output.report)
    print_summary(report)
    print(f"report: {path}")
    return EXIT_OK if report.passed else EXIT_FAILED


def main(argv: list[str] | None = None) -> int:
    return guarded(run, build_parser().parse_args(argv))
