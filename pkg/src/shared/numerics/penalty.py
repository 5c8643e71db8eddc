"""
Containment function, point penalizations (collections 1 and 2), the Ξ assembly and the
cut-off functions Ω±_M, with their certificates.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
import numpy.typing as npt

from shared.numerics.funcspace import (
    FunctionField,
    Matrix,
    Point,
    SampleCloud,
    ScalarField,
    Smoothness,
    Vector,
    as_point,
    fd_hessian,
    linear_field,
    quadratic_field,
)
from shared.schemas.reports import CheckReport, CheckStatus

logger = logging.getLogger(__name__)

DEFAULT_R = 3.0
DEFAULT_RP = 4.0
DEFAULT_RPP = 5.0
KAPPA_MARGIN = 1.05
MIDPOINT_TOLERANCE = 1e-12
SCAN_RADII = 2000
SMALL_SEGMENTS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


# ---------------------------------------------------------------------------
# containment
# ---------------------------------------------------------------------------


def log_containment(dim: int | None = None) -> FunctionField:
    """
    V(x) = log(1 + ½|x|²) with ∇V = 2x/(2+|x|²).
    """

    def value(x: Point) -> float:
        return math.log1p(0.5 * float(x @ x))

    def gradient(x: Point) -> Vector:
        return x / (1.0 + 0.5 * float(x @ x))

    def hessian(x: Point) -> Matrix:
        s = 1.0 + 0.5 * float(x @ x)
        return np.eye(x.size) / s - np.outer(x, x) / s**2

    return FunctionField(
        value_fn=value,
        values_fn=lambda pts: np.log1p(0.5 * np.sum(pts * pts, axis=1)),
        gradient_fn=gradient,
        hessian_fn=hessian,
        smoothness=Smoothness.CINF,
        bound_below=0.0,
        dim=dim,
        label="V",
    )


@dataclass(frozen=True)
class Containment:
    """
    Containment function V ≥ 0 with compact sublevel sets and semi-concavity constant κ_V.
    """

    V: ScalarField = field(default_factory=log_containment)
    kappa_v: float = 1.0
    argmin: tuple[float, ...] | None = None
    radius_fn: Callable[[float], float] | None = None

    @classmethod
    def default(cls, dim: int) -> Containment:
        return cls(
            V=log_containment(dim),
            kappa_v=1.0,
            argmin=(0.0,) * dim,
            radius_fn=lambda level: math.sqrt(2.0 * math.expm1(max(level, 0.0))),
        )

    def radius_for_level(self, level: float) -> float:
        """
        Radius of a ball containing the sublevel set {V ≤ level}.
        """

        if self.radius_fn is None:
            raise NotImplementedError(f"{self.V.label} declares no sublevel radius")
        return float(self.radius_fn(level))

    def certify(self, K: SampleCloud, tolerance_scale: float = 1.0) -> CheckReport:
        start = time.perf_counter()
        values = self.V.values(K.points)
        argmin = np.zeros(K.dim) if self.argmin is None else as_point(self.argmin, K.dim)
        at_min = self.V.value(argmin)
        floor = float(np.min(values))
        attained = CheckReport(
            name="inf_attained",
            status=(
                CheckStatus.PASS if abs(at_min) <= 1e-12 and floor >= -1e-12 else CheckStatus.FAIL
            ),
            witness={"argmin": argmin, "value": at_min, "cloud_min": floor},
        )

        growth_worst, growth_witness = 0.0, {}
        for x in K.points:
            if not np.any(x != argmin):
                continue
            ray = [self.V.value(argmin + (x - argmin) * 2.0**k) for k in range(6)]
            drop = max(a - b for a, b in zip(ray[:-1], ray[1:], strict=True))
            if drop > growth_worst:
                growth_worst, growth_witness = drop, {"x": x, "ray": ray}
        growth = CheckReport(
            name="sublevel_compactness",
            status=CheckStatus.PASS if growth_worst <= 1e-12 else CheckStatus.FAIL,
            message="" if growth_worst <= 1e-12 else "V decreases along a ray",
            max_violation=growth_worst,
            witness=growth_witness,
        )

        rng = np.random.default_rng(K.seed)
        idx = rng.integers(0, len(K), size=(min(500, len(K) ** 2), 2))
        a, b = K.points[idx[:, 0]], K.points[idx[:, 1]]
        mid = self.V.values(0.5 * (a + b))
        bound = 0.5 * self.V.values(a) + 0.5 * self.V.values(b)
        bound -= self.kappa_v / 8.0 * np.sum((a - b) ** 2, axis=1)
        excess = bound - mid - MIDPOINT_TOLERANCE * tolerance_scale * (1.0 + np.abs(bound))
        k = int(np.argmax(excess)) if excess.size else 0
        concave = CheckReport(
            name="semi_concavity",
            status=CheckStatus.PASS if excess.size == 0 or excess[k] <= 0 else CheckStatus.FAIL,
            max_violation=max(float(excess[k]), 0.0) if excess.size else 0.0,
            witness={"a": a[k], "b": b[k]} if excess.size else {},
            constants={"kappa_V": self.kappa_v},
        )
        return CheckReport.from_items(
            "containment",
            [attained, growth, concave],
            constants={"kappa_V": self.kappa_v, "cloud": K.as_dict()},
            runtime_ms=(time.perf_counter() - start) * 1000.0,
        )


# ---------------------------------------------------------------------------
# penalizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuinticStep:
    """
    ℓ̄: 1 on [0, R′], 0 on [R″, ∞), C² quintic smoothstep between.
    """

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.hi > self.lo:
            raise ValueError("smoothstep needs hi > lo")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def _t(self, r: npt.ArrayLike) -> np.ndarray:
        return np.clip((np.asarray(r, dtype=np.float64) - self.lo) / self.width, 0.0, 1.0)

    def __call__(self, r: npt.ArrayLike) -> np.ndarray:
        t = self._t(r)
        return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t)

    def d1(self, r: npt.ArrayLike) -> np.ndarray:
        t = self._t(r)
        return -30.0 * t * t * (1.0 - t) ** 2 / self.width

    def d2(self, r: npt.ArrayLike) -> np.ndarray:
        t = self._t(r)
        return -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / self.width**2

    def knots(self) -> dict[str, float]:
        return {"lo": self.lo, "hi": self.hi}


def _radial(x: Point, z: Point) -> tuple[float, Vector]:
    diff = x - z
    r = float(np.linalg.norm(diff))
    return r, (diff / r if r > 0 else np.zeros_like(diff))


@dataclass(frozen=True)
class PenaltyFamily:
    """
    Collection 1: ζ_{z,p}(x) = ⟨p, x−z⟩, ξ_z(x) = ½d²(x,z).
    Collection 2: the same fields blended by ℓ̄ into a plateau (R″+1)² beyond R″.

    ``xi_factory`` replaces ξ_z with an arbitrary field and exists for checking
    candidate families that are not one of the two collections.
    """

    collection: int = 1
    R: float = DEFAULT_R
    Rp: float = DEFAULT_RP
    Rpp: float = DEFAULT_RPP
    xi_factory: Callable[[Point], ScalarField] | None = None

    def __post_init__(self) -> None:
        if self.collection not in (1, 2):
            raise ValueError("penalty collection must be 1 or 2")
        if not 0.0 < self.R < self.Rp < self.Rpp:
            raise ValueError("penalty radii need 0 < R < R′ < R″")

    @property
    def ellbar(self) -> QuinticStep:
        return QuinticStep(self.Rp, self.Rpp)

    @property
    def plateau(self) -> float:
        return (self.Rpp + 1.0) ** 2

    def kappa_xi(self, dim: int = 1) -> float:
        """
        Semi-concavity constant of ξ: 1 for collection 1, a radial Hessian scan otherwise.
        """

        if self.collection == 1 and self.xi_factory is None:
            return 1.0
        xi = self.xi(np.zeros(dim))
        e = np.zeros(dim)
        e[0] = 1.0
        top = 0.0
        for r in np.linspace(1e-3, self.Rpp + 1.0, SCAN_RADII):
            hess = xi.hessian(r * e) if xi.has_hessian else fd_hessian(xi, r * e)
            top = max(top, float(np.max(np.linalg.eigvalsh(hess))))
        return top

    def xi(self, z: Any) -> ScalarField:
        zc = as_point(z)
        if self.xi_factory is not None:
            return self.xi_factory(zc)
        if self.collection == 1:
            return quadratic_field(zc, scale=1.0)
        ell, plateau, rp, rpp = self.ellbar, self.plateau, self.Rp, self.Rpp

        def value(x: Point) -> float:
            r = float(np.linalg.norm(x - zc))
            w = float(ell(r))
            return w * 0.5 * r * r + (1.0 - w) * plateau

        def values(pts: np.ndarray) -> np.ndarray:
            r = np.linalg.norm(pts - zc, axis=1)
            w = ell(r)
            return w * 0.5 * r * r + (1.0 - w) * plateau

        def gradient(x: Point) -> Vector:
            r, u = _radial(x, zc)
            if r <= rp:
                return x - zc
            if r >= rpp:
                return np.zeros(x.size)
            d1 = float(ell.d1(r)) * (0.5 * r * r - plateau) + float(ell(r)) * r
            return d1 * u

        def hessian(x: Point) -> Matrix:
            r, u = _radial(x, zc)
            q = x.size
            if r <= rp:
                return np.eye(q)
            if r >= rpp:
                return np.zeros((q, q))
            w, w1, w2 = float(ell(r)), float(ell.d1(r)), float(ell.d2(r))
            phi1 = w1 * (0.5 * r * r - plateau) + w * r
            phi2 = w2 * (0.5 * r * r - plateau) + 2.0 * w1 * r + w
            uu = np.outer(u, u)
            return phi2 * uu + (phi1 / r) * (np.eye(q) - uu)

        return FunctionField(
            value_fn=value,
            values_fn=values,
            gradient_fn=gradient,
            hessian_fn=hessian,
            smoothness=Smoothness.C2,
            bound_below=0.0,
            dim=zc.size,
            label="xi_bar",
        )

    def zeta(self, z: Any, p: Any) -> ScalarField:
        zc, pv = as_point(z), as_point(p)
        if self.collection == 1:
            return linear_field(pv, zc)
        ell, rp, rpp = self.ellbar, self.Rp, self.Rpp

        def value(x: Point) -> float:
            r = float(np.linalg.norm(x - zc))
            return float(ell(r)) * float(pv @ (x - zc))

        def values(pts: np.ndarray) -> np.ndarray:
            r = np.linalg.norm(pts - zc, axis=1)
            return ell(r) * ((pts - zc) @ pv)

        def gradient(x: Point) -> Vector:
            r, u = _radial(x, zc)
            if r <= rp:
                return pv.copy()
            if r >= rpp:
                return np.zeros(x.size)
            lin = float(pv @ (x - zc))
            return float(ell.d1(r)) * lin * u + float(ell(r)) * pv

        def hessian(x: Point) -> Matrix:
            r, u = _radial(x, zc)
            q = x.size
            if r <= rp or r >= rpp:
                return np.zeros((q, q))
            lin = float(pv @ (x - zc))
            w1, w2 = float(ell.d1(r)), float(ell.d2(r))
            uu = np.outer(u, u)
            radial = w2 * uu + (w1 / r) * (np.eye(q) - uu)
            cross = w1 * (np.outer(u, pv) + np.outer(pv, u))
            return lin * radial + cross

        return FunctionField(
            value_fn=value,
            values_fn=values,
            gradient_fn=gradient,
            hessian_fn=hessian,
            smoothness=Smoothness.C2,
            dim=zc.size,
            label="zeta_bar",
        )

    def as_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"collection": self.collection, "R": self.R}
        if self.collection == 2:
            out.update({"Rp": self.Rp, "Rpp": self.Rpp, "ellbar": self.ellbar.knots()})
        return out


@dataclass(frozen=True)
class XiBundle:
    """
    Ξ⁰ = ξ_{z0} + ζ_{z0,p} and Ξ = Ξ⁰ + ξ_{z1}.
    """

    z0: Point
    z1: Point
    p: Vector
    family: PenaltyFamily = field(default_factory=PenaltyFamily)
    variant: str = "xi"

    def __post_init__(self) -> None:
        if self.variant not in ("xi0", "xi"):
            raise ValueError("Ξ variant must be 'xi0' or 'xi'")
        object.__setattr__(self, "z0", as_point(self.z0))
        object.__setattr__(self, "z1", as_point(self.z1, self.z0.size))
        object.__setattr__(self, "p", as_point(self.p, self.z0.size))

    def field(self) -> ScalarField:
        xi0 = self.family.xi(self.z0) + self.family.zeta(self.z0, self.p)
        if self.variant == "xi0":
            return xi0
        return xi0 + self.family.xi(self.z1)

    def base(self) -> XiBundle:
        return XiBundle(z0=self.z0, z1=self.z1, p=self.p, family=self.family, variant="xi0")


def eval_xi(bundle: XiBundle, y: Any) -> float:
    return bundle.field().value(as_point(y, bundle.z0.size))


def _directions(dim: int, rng: np.random.Generator, extra: int = 8) -> np.ndarray:
    eye = np.eye(dim)
    random = rng.standard_normal((extra, dim))
    random /= np.linalg.norm(random, axis=1, keepdims=True)
    return np.vstack([eye, -eye, random])


def certify_family(
    family: PenaltyFamily, K: SampleCloud, tolerance_scale: float = 1.0
) -> CheckReport:
    """
    Linearity near z, certified semi-concavity constant κ_ξ, positivity and domination of
    the penalty family, each reported as an item with its worst witness.
    """

    start = time.perf_counter()
    rng = np.random.default_rng(K.seed)
    centers = K.points[: min(len(K), 20)]
    directions = _directions(K.dim, rng)

    # (a) ζ linear on B_R(z)
    lin_worst, lin_witness = 0.0, {}
    for z in centers:
        p = directions[int(rng.integers(len(directions)))]
        zeta = family.zeta(z, p)
        line_pts = z + np.linspace(-family.R, family.R, 9)[:, None] * directions[0]
        gap = np.abs(zeta.values(line_pts) - (line_pts - z) @ p)
        k = int(np.argmax(gap))
        if gap[k] > lin_worst:
            lin_worst, lin_witness = float(gap[k]), {"z": z, "p": p, "y": line_pts[k]}
    linear = CheckReport(
        name="linearity",
        status=CheckStatus.PASS if lin_worst <= 1e-12 * tolerance_scale else CheckStatus.FAIL,
        max_violation=lin_worst,
        witness=lin_witness,
    )

    # (b) semi-concavity: κ_ξ from a Hessian scan, then the midpoint test
    z = centers[0]
    xi = family.xi(z)
    radii = np.linspace(1e-3, family.Rpp + 1.0, SCAN_RADII)
    top = -math.inf
    for u in directions[: min(len(directions), 2 * K.dim + 2)]:
        for r in radii:
            point = z + r * u
            hess = xi.hessian(point) if xi.has_hessian else fd_hessian(xi, point)
            top = max(top, float(np.max(np.linalg.eigvalsh(hess))))
    kappa = KAPPA_MARGIN * max(top, 0.0)
    segments: list[tuple[Point, Point]] = []
    for u in directions:
        for t in (*SMALL_SEGMENTS, 0.5, 1.0, family.Rp, family.Rpp):
            segments.append((z - t * u, z + t * u))
            segments.append((z + 0.5 * family.Rpp * u - t * u, z + 0.5 * family.Rpp * u + t * u))
    for _ in range(200):
        i, j = rng.integers(0, len(K), size=2)
        segments.append((K.points[i], K.points[j]))
    sc_worst, sc_witness = 0.0, {}
    for a, b in segments:
        mid = xi.value(0.5 * (a + b))
        bound = 0.5 * xi.value(a) + 0.5 * xi.value(b) - kappa / 8.0 * float((a - b) @ (a - b))
        excess = bound - mid - MIDPOINT_TOLERANCE * tolerance_scale * (1.0 + abs(bound))
        if excess > sc_worst:
            sc_worst, sc_witness = excess, {"a": a, "b": b, "midpoint_value": mid, "bound": bound}
    semi_concave = CheckReport(
        name="semi_concavity",
        status=CheckStatus.PASS if sc_worst <= 0 else CheckStatus.FAIL,
        message="" if sc_worst <= 0 else "ξ fails the midpoint test with the scanned κ_ξ",
        max_violation=sc_worst,
        witness=sc_witness,
        constants={"kappa_xi": max(top, 0.0), "kappa_xi_certified": kappa},
    )

    # (c) ξ_z(z) = 0 and ξ_z(y) > 0 for y ≠ z
    pos_worst, pos_witness = 0.0, {}
    for z in centers:
        xi_z = family.xi(z)
        at_center = abs(xi_z.value(z))
        others = K.points[np.any(K.points != z, axis=1)]
        low = float(np.min(xi_z.values(others))) if len(others) else math.inf
        violation = max(at_center, -low if low <= 0 else 0.0, 1.0 if low == 0 else 0.0)
        if violation > pos_worst:
            pos_worst, pos_witness = violation, {"z": z, "xi_at_z": at_center, "min_elsewhere": low}
    positive = CheckReport(
        name="positivity",
        status=CheckStatus.PASS if pos_worst <= 1e-12 else CheckStatus.FAIL,
        max_violation=pos_worst,
        witness=pos_witness,
    )

    # (d) inf over |p| ≤ 1 and y outside B_R(z) of ξ_z(y) + ζ_{z,p}(y) > 0
    dom_min, dom_witness = math.inf, {}
    shells = np.linspace(family.R, family.Rpp + 2.0, 40)
    for z in centers[:5]:
        xi_z = family.xi(z)
        for u in directions:
            for r in shells:
                y = z + r * u
                zeta = family.zeta(z, -u)
                value = xi_z.value(y) + zeta.value(y)
                if value < dom_min:
                    dom_min, dom_witness = value, {"z": z, "y": y, "p": -u, "value": value}
    dominated = CheckReport(
        name="domination",
        status=CheckStatus.PASS if dom_min > 0 else CheckStatus.FAIL,
        message="" if dom_min > 0 else "ξ + ζ not positive outside B_R(z)",
        witness=dom_witness,
        constants={"infimum": dom_min, "R": family.R},
    )
    report = CheckReport.from_items(
        "penalty_family",
        [linear, semi_concave, positive, dominated],
        constants={"kappa_xi": max(top, 0.0), **family.as_dict(), "cloud": K.as_dict()},
        runtime_ms=(time.perf_counter() - start) * 1000.0,
    )
    logger.info("penalty family collection=%s status=%s", family.collection, report.status.value)
    return report


def distance_field(z: Point) -> FunctionField:
    """
    x ↦ d(x, z); not a valid ξ, kept for exercising the certificate.
    """

    def gradient(x: Point) -> Vector:
        _, u = _radial(x, z)
        return u

    def hessian(x: Point) -> Matrix:
        r, u = _radial(x, z)
        if r == 0:
            return np.zeros((x.size, x.size))
        return (np.eye(x.size) - np.outer(u, u)) / r

    return FunctionField(
        value_fn=lambda x: float(np.linalg.norm(x - z)),
        values_fn=lambda pts: np.linalg.norm(pts - z, axis=1),
        gradient_fn=gradient,
        hessian_fn=hessian,
        smoothness=Smoothness.C0,
        dim=z.size,
        label="distance",
    )


# ---------------------------------------------------------------------------
# cut-off functions
# ---------------------------------------------------------------------------


class CutSide(str, Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class CutOff:
    """
    Ω⁺_M(r) = r (r ≤ M), M + t − t²/4 with t = r − M on [M, M+2], M+1 (r ≥ M+2).
    Ω⁻_M(r) = −Ω⁺_{−M}(−r).
    """

    M: float
    side: CutSide = CutSide.UPPER

    @staticmethod
    def _upper(m: float, r: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = np.clip(r - m, 0.0, 2.0)
        inside = (r > m) & (r < m + 2.0)
        value = np.where(r <= m, r, m + t - 0.25 * t * t)
        slope = np.where(r <= m, 1.0, np.where(inside, 1.0 - 0.5 * t, 0.0))
        curve = np.where(inside, -0.5, 0.0)
        return value, slope, curve

    def profile(self, r: npt.ArrayLike) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        (Ω(r), Ω′(r), Ω″(r)) elementwise.
        """

        r = np.asarray(r, dtype=np.float64)
        if self.side == CutSide.UPPER:
            return self._upper(self.M, r)
        value, slope, curve = self._upper(-self.M, -r)
        return -value, slope, -curve

    def __call__(self, r: npt.ArrayLike) -> np.ndarray:
        return self.profile(r)[0]

    def knot_jumps(self, h: float = 1e-9) -> float:
        """
        Largest jump of Ω′ across the two knots.
        """

        knots = (self.M, self.M + 2.0) if self.side == CutSide.UPPER else (self.M - 2.0, self.M)
        jumps = []
        for k in knots:
            _, slopes, _ = self.profile(np.array([k - h, k + h]))
            jumps.append(abs(float(slopes[1] - slopes[0])))
        return max(jumps)


def apply_cutoff(c: CutOff, f: ScalarField) -> FunctionField:
    """
    Ω ∘ f with chain-rule derivatives.
    """

    def value(x: Point) -> float:
        return float(c(f.value(x)))

    def gradient(x: Point) -> Vector:
        _, slope, _ = c.profile(f.value(x))
        return float(slope) * f.gradient(x)

    def hessian(x: Point) -> Matrix:
        _, slope, curve = c.profile(f.value(x))
        grad = f.gradient(x)
        return float(curve) * np.outer(grad, grad) + float(slope) * f.hessian(x)

    return FunctionField(
        value_fn=value,
        values_fn=lambda pts: c(f.values(pts)),
        gradient_fn=gradient if f.has_gradient else None,
        hessian_fn=hessian if f.has_hessian else None,
        smoothness=min(f.smoothness, Smoothness.C1),
        bound_above=c.M + 1.0 if c.side == CutSide.UPPER else None,
        bound_below=c.M - 1.0 if c.side == CutSide.LOWER else None,
        dim=f.dim,
        label=f"cut_{c.side.value}({f.label})",
    )


def check_containment_jump_bounds(
    samples: int = 10_000, seed: int = 0, dim: int = 1, tolerance: float = 1e-12
) -> CheckReport:
    """
    Increment bounds of V∘s_z along a jump 𝐳 for the default containment function.
    """

    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    x = 3.0 * rng.standard_normal((samples, dim))
    z = 3.0 * rng.standard_normal((samples, dim))
    jumps = rng.uniform(-3.0, 3.0, (samples, dim))
    a = x - z
    sq_a = np.sum(a * a, axis=1)
    sq_j = np.sum(jumps * jumps, axis=1)
    base = np.log1p(0.5 * sq_a)
    increment = np.log1p(0.5 * np.sum((a + jumps) ** 2, axis=1)) - base
    exact = np.log1p((0.5 * sq_j + np.sum(a * jumps, axis=1)) / (1.0 + 0.5 * sq_a))
    large = sq_j >= 1.0
    grad_dot = np.sum(jumps * a, axis=1) / (1.0 + 0.5 * sq_a)

    checks = {
        "lower": (-base) - increment,
        "sharp_upper": increment - exact,
        "large_jump_upper": np.where(large, increment - np.log1p(sq_j), -np.inf),
        "small_jump_compensated": np.where(
            ~large, np.abs(increment - grad_dot) - 0.5 * sq_j, -np.inf
        ),
    }
    items = []
    for name, excess in checks.items():
        k = int(np.argmax(excess))
        worst = float(excess[k])
        items.append(
            CheckReport(
                name=name,
                status=CheckStatus.PASS if worst <= tolerance else CheckStatus.FAIL,
                max_violation=max(worst, 0.0),
                witness={"x": x[k], "z": z[k], "jump": jumps[k]},
            )
        )
    return CheckReport.from_items(
        "containment_jump_bounds",
        items,
        constants={"samples": samples, "seed": seed},
        notes=["log(1+|z|²) upper bound applies to jumps with |z| ≥ 1"],
        runtime_ms=(time.perf_counter() - start) * 1000.0,
    )
