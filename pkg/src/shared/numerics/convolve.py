"""
Sup- and inf-convolutions over a sample cloud, with optimizer maps and the property
battery they satisfy.

    P^α[u](y) = max_x u(x) − (α/2)|x − y|²
    P_α[v](y) = min_x v(x) + (α/2)|x − y|²

The maximization is exact over the cloud; C² bases get a three-point parabolic polish
along each axis around the discrete optimizer. The infimum is computed as the negated
supremum of −v, so the two are dual to the last bit.
"""

from __future__ import annotations

import logging
import math
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from scipy.spatial import cKDTree

from shared.config import get_settings
from shared.numerics.funcspace import (
    FunctionField,
    Matrix,
    Point,
    SampleCloud,
    ScalarField,
    Smoothness,
    Vector,
    as_point,
)
from shared.schemas.reports import CheckReport, CheckStatus

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12
CHUNK = 2048


class ConvolutionKind(str, Enum):
    SUP = "sup"
    INF = "inf"


@dataclass(frozen=True)
class ConvolutionField:
    kind: ConvolutionKind
    alpha: float
    base: ScalarField
    domain: SampleCloud
    polish: bool = True
    _memo: dict[tuple[float, ...], tuple[float, Point]] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )
    _lock: threading.Lock = field(
        default_factory=threading.Lock, init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError("convolution parameter α must be positive")
        if self.base.dim is not None and self.base.dim != self.domain.dim:
            raise ValueError("convolution domain and base field live in different dimensions")
        values = self.sign * self.base.values(self.domain.points)
        object.__setattr__(self, "_domain_values", values)
        object.__setattr__(self, "_lo", np.min(self.domain.points, axis=0))
        object.__setattr__(self, "_hi", np.max(self.domain.points, axis=0))
        object.__setattr__(self, "_mesh", self.domain.mesh)

    @property
    def sign(self) -> float:
        return 1.0 if self.kind == ConvolutionKind.SUP else -1.0

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def polishing(self) -> bool:
        return self.polish and self.base.smoothness >= Smoothness.C2 and self._mesh > 0

    # -- optimization -------------------------------------------------------

    def _objective(self, x: Point, y: Point) -> float:
        diff = x - y
        return self.sign * self.base.value(x) - 0.5 * self.alpha * float(diff @ diff)

    def _discrete(self, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pts = self.domain.points
        vals = self._domain_values
        best = np.empty(len(ys))
        arg = np.empty(len(ys), dtype=int)
        sq = np.sum(pts * pts, axis=1)
        for start in range(0, len(ys), CHUNK):
            block = ys[start : start + CHUNK]
            dist = sq[None, :] - 2.0 * block @ pts.T + np.sum(block * block, axis=1)[:, None]
            scores = vals[None, :] - 0.5 * self.alpha * np.maximum(dist, 0.0)
            top = np.max(scores, axis=1)
            for row, (score_row, peak) in enumerate(zip(scores, top, strict=True)):
                ties = np.flatnonzero(score_row >= peak - TIE_TOLERANCE * (1.0 + abs(peak)))
                if ties.size > 1:
                    cand = pts[ties]
                    ties = ties[np.lexsort(cand.T[::-1])]
                k = int(ties[0])
                y = block[row]
                arg[start + row] = k
                best[start + row] = vals[k] - 0.5 * self.alpha * float((pts[k] - y) @ (pts[k] - y))
        return best, arg

    def _polish(self, y: Point, x0: Point, best: float) -> tuple[float, Point]:
        h = self._mesh
        x = x0.copy()
        for i in range(x.size):
            lo, hi = self._lo[i], self._hi[i]
            if lo == hi:
                continue
            e = np.zeros(x.size)
            e[i] = 1.0
            left = self._objective(np.clip(x - h * e, self._lo, self._hi), y)
            right = self._objective(np.clip(x + h * e, self._lo, self._hi), y)
            curvature = left - 2.0 * best + right
            if curvature >= 0:
                continue
            step = float(np.clip(h * (left - right) / (2.0 * curvature), -h, h))
            cand_x = np.clip(x + step * e, self._lo, self._hi)
            cand = self._objective(cand_x, y)
            if cand > best:
                x, best = cand_x, cand
        return best, x

    def solve(self, y: Any) -> tuple[float, Point]:
        """
        (value, argopt) at y, memoized.
        """

        point = as_point(y, self.dim)
        key = tuple(point.tolist())
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        best, arg = self._discrete(point[None, :])
        score, x0 = float(best[0]), np.array(self.domain.points[int(arg[0])])
        if self.polishing:
            score, x0 = self._polish(point, x0, score)
        result = (self.sign * score, x0)
        with self._lock:
            self._memo.setdefault(key, result)
        return result

    # -- accessors ----------------------------------------------------------

    def value(self, y: Any) -> float:
        return self.solve(y)[0]

    __call__ = value

    def values(self, points: Any) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if not self.polishing:
            best, _ = self._discrete(pts)
            return self.sign * best
        return np.array([self.value(p) for p in pts])

    def argopt(self, y: Any) -> Point:
        return self.solve(y)[1]

    def gradient(self, y: Any) -> Vector:
        """
        α(x₀ − y) for the supremum and α(y − x₀) for the infimum.
        """

        point = as_point(y, self.dim)
        return self.sign * self.alpha * (self.argopt(point) - point)

    def hessian(self, y: Any, h: float | None = None) -> Matrix:
        """
        Central differences of the optimizer-map gradient, symmetrized.
        """

        point = as_point(y, self.dim)
        base_step = get_settings().FD_STEP * (1.0 + float(np.linalg.norm(point)))
        step = h or max(base_step, self._mesh)
        q = point.size
        hess = np.empty((q, q))
        for i in range(q):
            e = np.zeros(q)
            e[i] = step
            hess[:, i] = (self.gradient(point + e) - self.gradient(point - e)) / (2.0 * step)
        return 0.5 * (hess + hess.T)

    def as_field(self) -> FunctionField:
        return FunctionField(
            value_fn=self.value,
            values_fn=self.values,
            gradient_fn=self.gradient,
            hessian_fn=self.hessian,
            smoothness=Smoothness.C1,
            dim=self.dim,
            label=f"{self.kind.value}_convolution({self.base.label}, {self.alpha:g})",
        )


def sup_convolve(
    u: ScalarField, alpha: float, domain: SampleCloud, polish: bool = True
) -> ConvolutionField:
    return ConvolutionField(ConvolutionKind.SUP, float(alpha), u, domain, polish)


def inf_convolve(
    v: ScalarField, alpha: float, domain: SampleCloud, polish: bool = True
) -> ConvolutionField:
    return ConvolutionField(ConvolutionKind.INF, float(alpha), v, domain, polish)


def _item(name: str, worst: float, witness: dict[str, Any], **constants: Any) -> CheckReport:
    return CheckReport(
        name=name,
        status=CheckStatus.PASS if worst <= 0 else CheckStatus.FAIL,
        max_violation=max(worst, 0.0),
        witness=witness if worst > 0 else {},
        constants=constants,
    )


def check_convolution_laws(
    u: ScalarField,
    v: ScalarField,
    alphas: list[float],
    points: SampleCloud,
    domain: SampleCloud | None = None,
    tolerance_scale: float = 1.0,
) -> CheckReport:
    """
    Norm bounds, optimizer gap bound, monotonicity in α, semi-convexity with constant α
    and the gradient/optimizer identity, on the sample points.

    The optimization cloud is ``domain`` joined with the sample points (those alone by
    default), so every sample point lies on the cloud.
    """

    start = time.perf_counter()
    if list(alphas) != sorted(alphas) or not alphas:
        raise ValueError("alphas must be a nonempty increasing list")
    cloud = points
    if domain is not None:
        cloud = SampleCloud.explicit(np.vstack([domain.points, points.points]))
    mesh = cloud.mesh
    ys = points.points
    u_on = u.values(ys)
    v_on = v.values(ys)
    norm_u = float(np.max(np.abs(u.values(cloud.points))))
    norm_v = float(np.max(np.abs(v.values(cloud.points))))
    sups = [sup_convolve(u, a, cloud) for a in alphas]
    infs = [inf_convolve(v, a, cloud) for a in alphas]
    slack = (alphas[-1] * mesh * mesh if any(c.polishing for c in sups + infs) else 0.0) + 1e-10

    items: list[CheckReport] = []

    # (a) ‖P^α[u]‖ ≤ ‖u‖, ‖P_α[v]‖ ≤ ‖v‖ and P_α[u] ≤ u ≤ P^α[u]
    worst, witness = -math.inf, {}
    for a, sp, ip in zip(alphas, sups, infs, strict=True):
        ps, pi = sp.values(ys), ip.values(ys)
        lower_u = inf_convolve(u, a, cloud).values(ys)
        excess = np.maximum.reduce(
            [
                np.abs(ps) - norm_u,
                np.abs(pi) - norm_v,
                u_on - ps,
                lower_u - u_on,
            ]
        ) - (slack + 1e-12 * (1.0 + norm_u + norm_v)) * tolerance_scale
        k = int(np.argmax(excess))
        if excess[k] > worst:
            worst, witness = float(excess[k]), {"y": ys[k], "alpha": a, "sup": ps[k], "inf": pi[k]}
    items.append(_item("norm_bounds", worst, witness, norm_u=norm_u, norm_v=norm_v))

    # (b) (α/2)d²(x₀, y) ≤ u(x₀) − u(y)
    worst, witness = -math.inf, {}
    for a, sp in zip(alphas, sups, strict=True):
        for y, uy in zip(ys, u_on, strict=True):
            x0 = sp.argopt(y)
            gap = 0.5 * a * float((x0 - y) @ (x0 - y)) - (u.value(x0) - uy)
            gap -= 1e-12 * tolerance_scale * (1.0 + abs(uy))
            if gap > worst:
                worst, witness = gap, {"y": y, "argopt": x0, "alpha": a}
    items.append(_item("optimizer_gap", worst, witness))

    # (c) P^α[u] nonincreasing and P_α[v] nondecreasing in α
    worst, witness = -math.inf, {}
    for k in range(len(alphas) - 1):
        up = sups[k + 1].values(ys) - sups[k].values(ys)
        down = infs[k].values(ys) - infs[k + 1].values(ys)
        excess = np.maximum(up, down) - slack * tolerance_scale
        j = int(np.argmax(excess))
        if excess[j] > worst:
            worst, witness = float(excess[j]), {"y": ys[j], "alphas": [alphas[k], alphas[k + 1]]}
    items.append(_item("monotone_in_alpha", worst, witness))

    # (d) P^α[u] + (α/2)|·|² convex: midpoint test on neighbouring sample pairs
    worst, witness = -math.inf, {}
    lipschitz = 0.0
    if len(ys) > 1:
        _, nbr = cKDTree(ys).query(ys, k=min(3, len(ys)))
        pairs = {(min(i, int(j)), max(i, int(j))) for i in range(len(ys)) for j in nbr[i, 1:]}
        pairs.update((i, len(ys) - 1 - i) for i in range(len(ys) // 2))
        for a, sp in zip(alphas, sups, strict=True):

            def g(y: Point, sp: ConvolutionField = sp, a: float = a) -> float:
                return sp.value(y) + 0.5 * a * float(y @ y)

            for i, j in sorted(pairs):
                ya, yb = ys[i], ys[j]
                mid = g(0.5 * (ya + yb))
                bound = 0.5 * g(ya) + 0.5 * g(yb)
                excess = mid - bound - slack * tolerance_scale * (1.0 + abs(bound))
                if excess > worst:
                    worst, witness = excess, {"a": ya, "b": yb, "alpha": a}
                d = float(np.linalg.norm(ya - yb))
                if d > 0:
                    lipschitz = max(lipschitz, abs(sp.value(ya) - sp.value(yb)) / d)
    items.append(_item("semi_convexity", worst, witness, lipschitz_estimate=lipschitz))

    # (e) DP^α[u](y₀) = α(x₀ − y₀) where central differences are stable
    tol = max(1e-4, 10.0 * mesh) * tolerance_scale
    worst, witness = -math.inf, {}
    tested, ties = 0, 0
    h1 = max(1e-4, mesh)
    for a, sp in zip(alphas, sups, strict=True):
        for y in ys:
            if np.any(y - 2 * h1 < sp._lo) or np.any(y + 2 * h1 > sp._hi):
                continue
            fd1, fd2 = _fd_gradient(sp, y, h1), _fd_gradient(sp, y, 2 * h1)
            if float(np.max(np.abs(fd1 - fd2))) > tol * (1.0 + a):
                ties += 1
                continue
            tested += 1
            excess = float(np.max(np.abs(fd1 - sp.gradient(y)))) - tol * (1.0 + a)
            if excess > worst:
                worst, witness = excess, {"y": y, "alpha": a, "fd": fd1, "identity": sp.gradient(y)}
    items.append(
        _item("gradient_identity", worst if tested else 0.0, witness, tested=tested, unstable=ties)
    )

    report = CheckReport.from_items(
        "convolution_laws",
        items,
        constants={"alphas": list(alphas), "mesh": mesh, "points": points.as_dict()},
        runtime_ms=(time.perf_counter() - start) * 1000.0,
    )
    logger.info("convolution laws alphas=%s status=%s", alphas, report.status.value)
    return report


def _fd_gradient(f: ConvolutionField, y: Point, h: float) -> Vector:
    grad = np.empty(y.size)
    for i in range(y.size):
        e = np.zeros(y.size)
        e[i] = h
        grad[i] = (f.value(y + e) - f.value(y - e)) / (2.0 * h)
    return grad
