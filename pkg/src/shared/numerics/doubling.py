"""
Doubling of variables over a sample cloud.

For each α of a schedule: maximize the penalized functional Λ_α over pairs of cloud
points, tilt it with a small Jensen shift so the maximizer becomes a point of twice
differentiability, read off the convolution optimizers, build the cut-off test
functions f† and f‡ and evaluate the Hamiltonian gap. Every row records the
diagnostics that the comparison argument relies on; the trace report asserts them.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.stats import qmc

from shared.config import get_settings
from shared.numerics.convolve import ConvolutionField, inf_convolve, sup_convolve
from shared.numerics.errors import (
    CloudTooCoarseError,
    DimensionMismatchError,
    JensenSearchError,
    MissingDerivativeError,
    SqueezeError,
)
from shared.numerics.funcspace import (
    FunctionField,
    LinearCombination,
    Point,
    SampleCloud,
    ScalarField,
    Vector,
    as_point,
    fd_gradient,
    fd_hessian,
)
from shared.numerics.operators import Hamiltonian, evaluate, lyapunov_bound
from shared.numerics.parallel import parallel_map
from shared.numerics.penalty import (
    Containment,
    CutOff,
    CutSide,
    PenaltyFamily,
    XiBundle,
    apply_cutoff,
)
from shared.numerics.resolvent import strict_constants
from shared.schemas.reports import CheckReport, CheckStatus
from shared.schemas.trace import TraceRow, TraceSummary

logger = logging.getLogger(__name__)

DEFAULT_SCHEDULE: tuple[float, ...] = tuple(2.0**k for k in range(1, 13))
PAIR_CHUNK = 256
TIE_TOLERANCE = 1e-12
SANDWICH_TOLERANCE = 1e-9
HESSIAN_STABILITY = 1e-3
GRADIENT_TOLERANCE = 1e-4
COALESCENCE_TARGET = 1e-2
SEMI_CONVEX_DIRECTIONS = 8
GAP_SAMPLES = 256
LYAPUNOV_POINTS = 256
LYAPUNOV_LEVELS = 4

SURROGATE_NOTE = "test functions use the midpoint of the squeeze band as the smooth surrogate"
RECONSTRUCTION_NOTE = "C⁰ = 2c_V/(1−ε²) and C_{ε,φ} = 2φ/(1−ε²)·sup_K̂ ℍΞ are reconstructed"


# ---------------------------------------------------------------------------
# problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DoublingProblem:
    """
    Sub- and supersolution u, v of f − λℍf = h₁, h₂ with the doubling parameters
    ε ∈ (0, 1) and φ ∈ (0, 1], the compact K and the working cloud.
    """

    u: ScalarField
    v: ScalarField
    op: Hamiltonian
    lam: float
    h1: ScalarField
    h2: ScalarField
    K: SampleCloud
    cloud: SampleCloud
    eps: float
    phi: float = 1.0
    containment: Containment | None = None
    family: PenaltyFamily = field(default_factory=PenaltyFamily)
    coupling: Any | None = None
    c_v: float | None = None
    polish: bool = True
    seed: int = 0
    tolerance_scale: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.eps < 1.0:
            raise ValueError("ε must lie in (0, 1)")
        if not 0.0 < self.phi <= 1.0:
            raise ValueError("φ must lie in (0, 1]")
        if not self.lam > 0:
            raise ValueError("λ must be positive")
        if self.K.dim != self.cloud.dim:
            raise DimensionMismatchError("K and the working cloud live in different dimensions")
        if self.containment is None:
            object.__setattr__(self, "containment", Containment.default(self.cloud.dim))

    @property
    def dim(self) -> int:
        return self.cloud.dim

    @property
    def bundle(self) -> Containment:
        assert self.containment is not None
        return self.containment

    @property
    def V(self) -> ScalarField:
        return self.bundle.V

    @cached_property
    def _norm_points(self) -> np.ndarray:
        return np.vstack([self.cloud.points, self.K.points])

    @cached_property
    def norm_u(self) -> float:
        return float(np.max(np.abs(self.u.values(self._norm_points))))

    @cached_property
    def norm_v(self) -> float:
        return float(np.max(np.abs(self.v.values(self._norm_points))))

    @cached_property
    def norm_h1(self) -> float:
        return float(np.max(np.abs(self.h1.values(self._norm_points))))

    @cached_property
    def norm_h2(self) -> float:
        return float(np.max(np.abs(self.h2.values(self._norm_points))))

    @property
    def eps1(self) -> float:
        return self.eps * self.phi / (1.0 - self.eps)

    @property
    def eps2(self) -> float:
        return self.eps * self.phi / (1.0 + self.eps)

    @property
    def containment_weights(self) -> tuple[float, float]:
        """
        Coefficients of V(y) and V(y′) in Λ_α.
        """

        rest = 1.0 - self.phi
        return self.eps / (1.0 - self.eps) * rest, self.eps / (1.0 + self.eps) * rest

    def kappa(self, alpha: float) -> float:
        """
        Semi-convexity constant of Λ_α: the two convolution blocks, the −(α/2)d² coupling
        (Hessian eigenvalue −2α) and the containment terms.
        """

        return (1.0 / (1.0 - self.eps) + 2.0) * alpha + self.containment_weights[0] * (
            self.bundle.kappa_v
        )

    def sandwich_bound(self, alpha: float) -> float:
        return self.phi * 2.0 * self.eps / ((1.0 - self.eps**2) * alpha)


# ---------------------------------------------------------------------------
# Λ_α
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LambdaPeak:
    y0: Point
    y0p: Point
    value: float
    discrete_value: float
    on_boundary: bool
    polished: bool


def _maximize_local(
    fn: Callable[[np.ndarray], float], w0: np.ndarray, scale: float
) -> tuple[np.ndarray, float]:
    """
    Nelder-Mead ascent from w0 with an axis simplex of the given size.
    """

    n = w0.size
    simplex = np.vstack([w0, w0 + scale * np.eye(n)])
    result = minimize(
        lambda w: -fn(w),
        w0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": 1e-10,
            "fatol": 1e-14,
            "maxiter": 400 * n,
        },
    )
    return np.asarray(result.x, dtype=np.float64), -float(result.fun)


@dataclass(frozen=True, kw_only=True)
class LambdaField(ScalarField):
    """
    Λ_α(y, y′) = P^α[u](y)/(1−ε) − P_α[v](y′)/(1+ε) − (α/2)d²(y, y′)
                 − (ε/(1−ε))(1−φ)V(y) − (ε/(1+ε))(1−φ)V(y′)   on R^{2q}.
    """

    prob: DoublingProblem
    alpha: float
    cloud: SampleCloud
    threads: int | None = None
    pu: ConvolutionField = field(init=False, repr=False, compare=False)
    pv: ConvolutionField = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError("α must be positive")
        object.__setattr__(self, "dim", 2 * self.cloud.dim)
        object.__setattr__(self, "label", f"Lambda({self.alpha:g})")
        object.__setattr__(
            self, "pu", sup_convolve(self.prob.u, self.alpha, self.cloud, self.prob.polish)
        )
        object.__setattr__(
            self, "pv", inf_convolve(self.prob.v, self.alpha, self.cloud, self.prob.polish)
        )

    @property
    def half(self) -> int:
        return self.cloud.dim

    def _value(self, w: Point) -> float:
        q, eps = self.half, self.prob.eps
        y, yp = w[:q], w[q:]
        c1, c2 = self.prob.containment_weights
        diff = y - yp
        return (
            self.pu.value(y) / (1.0 - eps)
            - self.pv.value(yp) / (1.0 + eps)
            - 0.5 * self.alpha * float(diff @ diff)
            - c1 * self.prob.V.value(y)
            - c2 * self.prob.V.value(yp)
        )

    def _values(self, points: np.ndarray) -> np.ndarray:
        q, eps = self.half, self.prob.eps
        ys, yps = points[:, :q], points[:, q:]
        c1, c2 = self.prob.containment_weights
        return (
            self.pu.values(ys) / (1.0 - eps)
            - self.pv.values(yps) / (1.0 + eps)
            - 0.5 * self.alpha * np.sum((ys - yps) ** 2, axis=1)
            - c1 * self.prob.V.values(ys)
            - c2 * self.prob.V.values(yps)
        )

    @cached_property
    def _sides(self) -> tuple[np.ndarray, np.ndarray]:
        pts, eps = self.cloud.points, self.prob.eps
        c1, c2 = self.prob.containment_weights
        containment = self.prob.V.values(pts)
        first = self.pu.values(pts) / (1.0 - eps) - c1 * containment
        second = -self.pv.values(pts) / (1.0 + eps) - c2 * containment
        return first, second

    def _pair_block(self, start: int) -> list[tuple[float, int, int]]:
        pts = self.cloud.points
        first, second = self._sides
        block = pts[start : start + PAIR_CHUNK]
        dist = (
            np.sum(block * block, axis=1)[:, None]
            - 2.0 * block @ pts.T
            + np.sum(pts * pts, axis=1)[None, :]
        )
        scores = (
            first[start : start + len(block), None]
            + second[None, :]
            - 0.5 * self.alpha * np.maximum(dist, 0.0)
        )
        top = float(np.max(scores))
        rows, cols = np.nonzero(scores >= top - TIE_TOLERANCE * (1.0 + abs(top)))
        return [
            (float(scores[r, c]), start + int(r), int(c))
            for r, c in zip(rows, cols, strict=True)
        ]

    def discrete_max(self) -> tuple[float, int, int]:
        """
        Best cloud pair; ties go to the smallest |y|²+|y′|², then lexicographic order.
        """

        blocks = parallel_map(
            self._pair_block, range(0, len(self.cloud), PAIR_CHUNK), self.threads
        )
        candidates = [entry for block in blocks for entry in block]
        top = max(entry[0] for entry in candidates)
        ties = [c for c in candidates if c[0] >= top - TIE_TOLERANCE * (1.0 + abs(top))]
        pts = self.cloud.points

        def rank(entry: tuple[float, int, int]) -> tuple[float, ...]:
            w = np.concatenate([pts[entry[1]], pts[entry[2]]])
            return (float(w @ w), *w.tolist())

        return min(ties, key=rank)

    def maximize(self) -> LambdaPeak:
        score, i, j = self.discrete_max()
        pts, q = self.cloud.points, self.half
        w0 = np.concatenate([pts[i], pts[j]])
        on_boundary = self.cloud.on_boundary(pts[i]) or self.cloud.on_boundary(pts[j])
        value, w, polished = self.value(w0), w0, False
        mesh = self.cloud.mesh
        if self.prob.polish and mesh > 0:
            lo = np.tile(np.min(pts, axis=0), 2)
            hi = np.tile(np.max(pts, axis=0), 2)
            w1, v1 = _maximize_local(self.value, w0, mesh)
            if v1 > value and np.all(w1 >= lo) and np.all(w1 <= hi):
                w, value, polished = w1, v1, True
        logger.debug(
            "lambda max alpha=%s value=%s discrete=%s polished=%s",
            self.alpha,
            value,
            score,
            polished,
        )
        return LambdaPeak(
            y0=np.array(w[:q]),
            y0p=np.array(w[q:]),
            value=float(value),
            discrete_value=score,
            on_boundary=on_boundary,
            polished=polished,
        )


def assemble_lambda(
    prob: DoublingProblem,
    alpha: float,
    cloud: SampleCloud | None = None,
    threads: int | None = None,
) -> LambdaField:
    return LambdaField(
        prob=prob, alpha=float(alpha), cloud=cloud or prob.cloud, threads=threads
    )


# ---------------------------------------------------------------------------
# Jensen perturbation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JensenResult:
    p1: Vector
    p2: Vector
    y: Point
    yp: Point
    value: float
    sup_value: float
    displacement: float
    hessian_change: float
    candidate: int
    log: list[dict[str, Any]] = field(default_factory=list)


def _candidate_shifts(q: int, eta: float, count: int, seed: int) -> np.ndarray:
    """
    p = 0 first, then a scrambled Sobol sweep of the box with half-side 0.999η/√q, whose
    halves lie inside B_η(0).
    """

    radius = 0.999 * eta / math.sqrt(q)
    shifts = [np.zeros(2 * q)]
    if count > 1:
        m = max(0, math.ceil(math.log2(count - 1)))
        sampler = qmc.Sobol(d=2 * q, scramble=True, seed=np.random.default_rng(seed))
        sample = sampler.random_base2(m)[: count - 1]
        shifts.extend((2.0 * sample - 1.0) * radius)
    return np.asarray(shifts)


def _check_semi_convex(
    phi_field: ScalarField, w0: np.ndarray, kappa: float, eta: float, seed: int, slack: float
) -> None:
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((SEMI_CONVEX_DIRECTIONS, w0.size))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    center = phi_field.value(w0)
    for d in directions:
        for t in (eta, 4.0 * eta):
            a, b = w0 - t * d, w0 + t * d
            bound = 0.5 * (phi_field.value(a) + phi_field.value(b)) + 0.5 * kappa * t * t
            if center > bound + slack:
                raise JensenSearchError(
                    f"semi-convexity with κ={kappa:g} fails on a sampled segment",
                    [{"a": a.tolist(), "b": b.tolist(), "midpoint": center, "bound": bound}],
                )


def jensen_perturb(
    phi_field: ScalarField,
    opt: tuple[Any, Any],
    family: PenaltyFamily,
    eta: float,
    eps1: float,
    eps2: float,
    *,
    kappa: float | None = None,
    seed: int = 0,
    candidates: int | None = None,
    mesh: float = 0.0,
    sup_value: float | None = None,
    tolerance_scale: float = 1.0,
) -> JensenResult:
    """
    Search shifts p = (p₁, p₂) with |pᵢ| < η such that

        φ_p(w) = φ(w) − ε₁(ξ_{y0} + ζ_{y0,p₁})(w₁) − ε₂(ξ_{y0′} + ζ_{y0′,p₂})(w₂)

    has a maximizer near (y0, y0′) at which its finite-difference Hessian is stable across
    two step sizes. The first admissible candidate wins.
    """

    y0 = as_point(opt[0])
    y0p = as_point(opt[1], y0.size)
    q = y0.size
    if not eta > 0:
        raise ValueError("η must be positive")
    kappa_xi = family.kappa_xi(q)
    margin = 1.0 - (eps1 + eps2) * kappa_xi
    if margin <= 0:
        raise JensenSearchError(f"1 − (ε₁+ε₂)κ_ξ = {margin:g} is not positive")
    settings = get_settings()
    w0 = np.concatenate([y0, y0p])
    top = phi_field.value(w0) if sup_value is None else float(sup_value)
    scale = 0.0 if kappa is None else kappa
    slack = tolerance_scale * (SANDWICH_TOLERANCE * (1.0 + abs(top)) + scale * mesh * mesh)
    if kappa is not None:
        _check_semi_convex(phi_field, w0, kappa, eta, seed, slack)

    xi1, xi2 = family.xi(y0), family.xi(y0p)
    upper = top + (eps1 + eps2) * eta
    shifts = _candidate_shifts(q, eta, candidates or settings.JENSEN_CANDIDATES, seed)
    log: list[dict[str, Any]] = []
    for index, shift in enumerate(shifts):
        p1, p2 = shift[:q], shift[q:]
        tilt1 = xi1 + family.zeta(y0, p1)
        tilt2 = xi2 + family.zeta(y0p, p2)

        def perturbed(w: np.ndarray, t1: ScalarField = tilt1, t2: ScalarField = tilt2) -> float:
            return phi_field.value(w) - eps1 * t1.value(w[:q]) - eps2 * t2.value(w[q:])

        w1, value = _maximize_local(perturbed, w0, 0.25 * eta)
        if value < perturbed(w0):
            w1, value = w0, perturbed(w0)
        displacement = max(
            float(np.linalg.norm(w1[:q] - y0)), float(np.linalg.norm(w1[q:] - y0p))
        )
        step = settings.FD_STEP * (1.0 + float(np.linalg.norm(w1)))
        tilted = FunctionField(value_fn=perturbed, dim=2 * q, label="phi_p")
        fine, coarse = fd_hessian(tilted, w1, step), fd_hessian(tilted, w1, 2.0 * step)
        change = float(np.max(np.abs(fine - coarse))) / (1.0 + float(np.max(np.abs(fine))))
        entry = {
            "candidate": index,
            "p": shift.tolist(),
            "value": value,
            "displacement": displacement,
            "hessian_change": change,
        }
        near = displacement <= eta + mesh
        sandwiched = top - slack <= value <= upper + slack
        stable = change < HESSIAN_STABILITY
        if near and sandwiched and stable:
            logger.debug("jensen accepted candidate=%s change=%s", index, change)
            return JensenResult(
                p1=p1.copy(),
                p2=p2.copy(),
                y=np.array(w1[:q]),
                yp=np.array(w1[q:]),
                value=value,
                sup_value=top,
                displacement=displacement,
                hessian_change=change,
                candidate=index,
                log=log,
            )
        entry["rejected"] = [
            name
            for name, ok in (("displacement", near), ("sandwich", sandwiched), ("hessian", stable))
            if not ok
        ]
        log.append(entry)
    raise JensenSearchError(f"no admissible shift among {len(shifts)} candidates", log)


# ---------------------------------------------------------------------------
# test functions and the Hamiltonian gap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RowState:
    """
    Everything one schedule row produced, before serialization.
    """

    alpha: float
    lam: LambdaField
    peak: LambdaPeak
    jensen: JensenResult
    x: Point
    xp: Point

    @property
    def y(self) -> Point:
        return self.jensen.y

    @property
    def yp(self) -> Point:
        return self.jensen.yp

    def xi_fields(self, family: PenaltyFamily, variant: str = "xi") -> tuple[ScalarField, ...]:
        first = XiBundle(self.peak.y0, self.y, self.jensen.p1, family, variant).field()
        second = XiBundle(self.peak.y0p, self.yp, self.jensen.p2, family, variant).field()
        return first, second


@dataclass(frozen=True)
class TouchingPair:
    f_dagger: ScalarField
    f_ddagger: ScalarField
    f_hat_dagger: ScalarField
    f_hat_ddagger: ScalarField
    m1: float
    m2: float
    report: CheckReport


def _squeeze_item(
    state: RowState, hat_dagger: ScalarField, hat_ddagger: ScalarField, tol: float
) -> CheckReport:
    pts = state.lam.cloud.points
    upper = state.lam.pu.values(pts) - hat_dagger.values(pts)
    lower = hat_ddagger.values(pts) - state.lam.pv.values(pts)
    touch_u = abs(hat_dagger.value(state.y) - state.lam.pu.value(state.y))
    touch_v = abs(hat_ddagger.value(state.yp) - state.lam.pv.value(state.yp))
    excess = {
        "below_f_hat_dagger": float(np.max(upper)),
        "above_f_hat_ddagger": float(np.max(lower)),
        "touch_at_y": touch_u,
        "touch_at_yp": touch_v,
    }
    name, worst = max(excess.items(), key=lambda kv: kv[1])
    if worst > tol:
        raise SqueezeError(
            f"squeeze violated ({name}) at α={state.alpha:g}",
            {"alpha": state.alpha, "kind": name, "excess": worst, "tolerance": tol},
        )
    return CheckReport(
        name="squeeze",
        status=CheckStatus.PASS,
        max_violation=max(worst, 0.0),
        constants={"tolerance": tol, **excess},
    )


def _gradient_item(
    state: RowState, f_dagger: ScalarField, f_ddagger: ScalarField, tolerance_scale: float
) -> CheckReport:
    alpha, mesh = state.alpha, state.lam.cloud.mesh
    expected_u = alpha * (state.x - state.y)
    expected_v = alpha * (state.yp - state.xp)
    analytic = max(
        float(np.max(np.abs(f_dagger.gradient(state.x) - expected_u))),
        float(np.max(np.abs(f_ddagger.gradient(state.xp) - expected_v))),
    )
    step_u = max(get_settings().FD_STEP * (1.0 + float(np.linalg.norm(state.x))), mesh)
    step_v = max(get_settings().FD_STEP * (1.0 + float(np.linalg.norm(state.xp))), mesh)
    numeric = max(
        float(np.max(np.abs(fd_gradient(f_dagger, state.x, step_u) - expected_u))),
        float(np.max(np.abs(fd_gradient(f_ddagger, state.xp, step_v) - expected_v))),
    )
    tol_analytic = GRADIENT_TOLERANCE * (1.0 + alpha) * tolerance_scale
    tol_numeric = max(GRADIENT_TOLERANCE, 10.0 * mesh) * (1.0 + alpha) * tolerance_scale
    excess = max(analytic - tol_analytic, numeric - tol_numeric)
    return CheckReport(
        name="gradient_identity",
        status=CheckStatus.PASS if excess <= 0 else CheckStatus.FAIL,
        max_violation=max(excess, 0.0),
        witness={} if excess <= 0 else {"alpha": alpha, "x": state.x, "xp": state.xp},
        constants={"analytic_error": analytic, "fd_error": numeric, "fd_tolerance": tol_numeric},
    )


def _unique_max_item(
    prob: DoublingProblem, state: RowState, f_dagger: ScalarField, f_ddagger: ScalarField
) -> CheckReport:
    pts = state.lam.cloud.points
    tol = SANDWICH_TOLERANCE * prob.tolerance_scale
    gaps_u = prob.u.values(pts) - f_dagger.values(pts)
    gaps_v = f_ddagger.values(pts) - prob.v.values(pts)
    at_x = prob.u.value(state.x) - f_dagger.value(state.x)
    at_xp = f_ddagger.value(state.xp) - prob.v.value(state.xp)
    excess = max(
        float(np.max(gaps_u)) - at_x - tol * (1.0 + abs(at_x)),
        float(np.max(gaps_v)) - at_xp - tol * (1.0 + abs(at_xp)),
    )
    half = 0.5 * state.lam.cloud.mesh
    far_u = np.linalg.norm(pts - state.x, axis=1) > half
    far_v = np.linalg.norm(pts - state.xp, axis=1) > half
    ties = int(np.sum(far_u & (gaps_u >= at_x - tol * (1.0 + abs(at_x))))) + int(
        np.sum(far_v & (gaps_v >= at_xp - tol * (1.0 + abs(at_xp))))
    )
    if excess > 0:
        status = CheckStatus.FAIL
    elif ties:
        status = CheckStatus.WARN
    else:
        status = CheckStatus.PASS
    return CheckReport(
        name="unique_max",
        status=status,
        message="" if status == CheckStatus.PASS else f"{ties} other cloud points attain the max",
        max_violation=max(excess, 0.0),
        constants={"u_minus_f_dagger_at_x": at_x, "ties": ties},
    )


def build_test_functions(prob: DoublingProblem, state: RowState) -> TouchingPair:
    """
    f̂† = (1−ε)Ω⁻_{M₁}(𝔣₁) + ε(1−φ)V + εφΞ₁ and f̂‡ = (1+ε)Ω⁺_{M₂}(𝔣₂) − ε(1−φ)V − εφΞ₂,
    shifted so that f†(x_α) = f̂†(y_α) and f‡(x′_α) = f̂‡(y′_α).

    𝔣₁ sits halfway between the two sides of the squeeze band, so f̂† = P^α[u] + ½εφξ_y
    where no cut applies.
    """

    eps, phi, alpha = prob.eps, prob.phi, state.alpha
    a, b = eps / (1.0 - eps), eps / (1.0 + eps)
    q, V, family = prob.dim, prob.V, prob.family
    pu, pv = state.lam.pu.as_field(), state.lam.pv.as_field()
    base1, base2 = state.xi_fields(family, "xi0")
    full1, full2 = state.xi_fields(family, "xi")
    frak1 = LinearCombination(
        terms=(
            (1.0 / (1.0 - eps), pu),
            (-a * (1.0 - phi), V),
            (-a * phi, base1),
            (-0.5 * a * phi, family.xi(state.y)),
        ),
        dim=q,
        label="f1",
    )
    frak2 = LinearCombination(
        terms=(
            (1.0 / (1.0 + eps), pv),
            (b * (1.0 - phi), V),
            (b * phi, base2),
            (0.5 * b * phi, family.xi(state.yp)),
        ),
        dim=q,
        label="f2",
    )
    pts = state.lam.cloud.points
    at_y, at_yp = frak1.value(state.y), frak2.value(state.yp)
    values1, values2 = frak1.values(pts), frak2.values(pts)
    sup1, inf2 = max(float(np.max(values1)), at_y), min(float(np.min(values2)), at_yp)
    d2 = float((state.y - state.yp) @ (state.y - state.yp))
    m1 = min(float(np.min(values1)), at_y - (at_yp - inf2) - 0.5 * alpha * d2)
    m2 = max(float(np.max(values2)), at_yp + (sup1 - at_y) + 0.5 * alpha * d2)

    hat1 = apply_cutoff(CutOff(m1, CutSide.LOWER), frak1)
    hat2 = apply_cutoff(CutOff(m2, CutSide.UPPER), frak2)
    f_hat_dagger = LinearCombination(
        terms=((1.0 - eps, hat1), (eps * (1.0 - phi), V), (eps * phi, full1)),
        dim=q,
        label="f_hat_dagger",
    )
    f_hat_ddagger = LinearCombination(
        terms=((1.0 + eps, hat2), (-eps * (1.0 - phi), V), (-eps * phi, full2)),
        dim=q,
        label="f_hat_ddagger",
    )
    f_dagger = f_hat_dagger.shifted(state.x - state.y)
    f_ddagger = f_hat_ddagger.shifted(state.xp - state.yp)

    scale = max(prob.norm_u, prob.norm_v, 1.0)
    squeeze_tol = prob.tolerance_scale * SANDWICH_TOLERANCE * (1.0 + scale)
    items = [
        _squeeze_item(state, f_hat_dagger, f_hat_ddagger, squeeze_tol),
        _gradient_item(state, f_dagger, f_ddagger, prob.tolerance_scale),
        _unique_max_item(prob, state, f_dagger, f_ddagger),
    ]
    report = CheckReport.from_items(
        "test_functions",
        items,
        constants={"alpha": alpha, "M1": m1, "M2": m2},
        notes=[SURROGATE_NOTE],
    )
    return TouchingPair(
        f_dagger=f_dagger,
        f_ddagger=f_ddagger,
        f_hat_dagger=f_hat_dagger,
        f_hat_ddagger=f_hat_ddagger,
        m1=m1,
        m2=m2,
        report=report,
    )


def hamiltonian_gap(prob: DoublingProblem, state: RowState, pair: TouchingPair) -> float:
    """
    ℍf†(x_α)/(1−ε) − ℍf‡(x′_α)/(1+ε).
    """

    try:
        upper = evaluate(prob.op, pair.f_dagger, state.x)
        lower = evaluate(prob.op, pair.f_ddagger, state.xp)
    except MissingDerivativeError:
        logger.error("hamiltonian gap lacks test-function derivatives alpha=%s", state.alpha)
        raise
    return upper / (1.0 - prob.eps) - lower / (1.0 + prob.eps)


# ---------------------------------------------------------------------------
# strict-comparison constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrictBound:
    level: float
    radius: float | None
    c_eps: float
    c_v: float
    components: dict[str, float] = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    def contains(self, V: ScalarField, points: np.ndarray) -> np.ndarray:
        """
        Mask of the points inside K̂ = {V ≤ level}.
        """

        return V.values(points) <= self.level * (1.0 + 1e-12)

    def as_dict(self) -> dict[str, Any]:
        return {
            "level": self.level,
            "radius": self.radius,
            "C_eps": self.c_eps,
            "c_V": self.c_v,
            "components": dict(self.components),
            "flags": list(self.flags),
        }


def _sampled_c_v(prob: DoublingProblem) -> float:
    pts = prob.cloud.points
    stride = max(1, len(pts) // LYAPUNOV_POINTS)
    coarse = SampleCloud.explicit(pts[::stride])
    bound = lyapunov_bound(prob.op, prob.V, coarse, levels=LYAPUNOV_LEVELS)
    if not bound.plateaued:
        logger.warning("lyapunov sup still growing c_V=%s", bound.value)
    return bound.value


def strict_bound(prob: DoublingProblem, c_v: float | None = None) -> StrictBound:
    """
    K̂ = {V ≤ (‖u‖+‖v‖)/ε + sup_K V} and C_ε, with c_V sampled when not supplied.
    """

    if c_v is None:
        c_v = prob.c_v if prob.c_v is not None else _sampled_c_v(prob)
    k_pts = prob.K.points
    eps = prob.eps
    sup_v_k = float(np.max(prob.V.values(k_pts)))
    mix = prob.u.values(k_pts) / (1.0 - eps) - prob.v.values(k_pts) / (1.0 + eps)
    constants = strict_constants(
        eps=eps,
        lam=prob.lam,
        c_v=c_v,
        sup_v_k=sup_v_k,
        norm_u=prob.norm_u,
        norm_v=prob.norm_v,
        norm_h1=prob.norm_h1,
        norm_h2=prob.norm_h2,
        inf_k_mix=float(np.min(mix)),
    )
    radius = (
        prob.bundle.radius_for_level(constants.level)
        if prob.bundle.radius_fn is not None
        else None
    )
    flags = () if math.isfinite(c_v) else ("c_V unbounded",)
    components = {
        "sup_K_V": sup_v_k,
        "lambda_c_V": prob.lam * c_v,
        "h_terms": (prob.norm_h1 + prob.norm_h2) / (1.0 - eps),
        "inf_K_mix": float(np.min(mix)),
        "norm_u": prob.norm_u,
        "norm_v": prob.norm_v,
    }
    return StrictBound(
        level=constants.level,
        radius=radius,
        c_eps=constants.c_eps,
        c_v=c_v,
        components=components,
        flags=flags,
    )


def gap_bound(
    prob: DoublingProblem, state: RowState, strict: StrictBound
) -> tuple[float, dict[str, float]]:
    """
    ε(C⁰ + C_{ε,φ}) with ℍΞ maximized over the cloud points inside K̂.
    """

    eps = prob.eps
    pts = state.lam.cloud.points
    inside = pts[strict.contains(prob.V, pts)]
    if len(inside) == 0:
        inside = np.vstack([state.y, state.yp])
    stride = max(1, len(inside) // GAP_SAMPLES)
    sampled = inside[::stride]
    xi1, xi2 = state.xi_fields(prob.family)
    sup_h = max(
        max(evaluate(prob.op, xi1, z), evaluate(prob.op, xi2, z)) for z in sampled
    )
    c0 = 2.0 * strict.c_v / (1.0 - eps**2)
    c_phi = 2.0 * prob.phi / (1.0 - eps**2) * sup_h
    return eps * (c0 + c_phi), {"C0": c0, "C_eps_phi": c_phi, "sup_H_xi": sup_h}


# ---------------------------------------------------------------------------
# the trace
# ---------------------------------------------------------------------------


@dataclass
class DoublingTrace:
    rows: list[TraceRow] = field(default_factory=list)
    report: CheckReport | None = None
    summary: TraceSummary | None = None
    strict: StrictBound | None = None
    cloud: SampleCloud | None = None

    @property
    def passed(self) -> bool:
        return self.report is not None and self.report.passed


class _Tracker:
    """
    Worst excess per named invariant across the rows, with the row that produced it.
    """

    def __init__(self, names: Sequence[str]):
        self.worst: dict[str, float] = {name: 0.0 for name in names}
        self.witness: dict[str, dict[str, Any]] = {name: {} for name in names}

    def record(self, name: str, excess: float, **witness: Any) -> None:
        if excess > self.worst[name] or (excess > 0 and not self.witness[name]):
            self.worst[name] = max(excess, self.worst[name])
            self.witness[name] = witness

    def item(self, name: str, **constants: Any) -> CheckReport:
        worst = self.worst[name]
        return CheckReport(
            name=name,
            status=CheckStatus.PASS if worst <= 0 else CheckStatus.FAIL,
            max_violation=worst,
            witness=self.witness[name] if worst > 0 else {},
            constants=constants,
        )


ROW_INVARIANTS = (
    "displacement",
    "xi0_sandwich",
    "lambda_sandwich",
    "sup_lambda_monotone",
    "row_estimate",
)


def _snap(cloud: SampleCloud, points: np.ndarray) -> np.ndarray:
    _, idx = cKDTree(cloud.points).query(points)
    return cloud.points[np.unique(np.atleast_1d(idx))]


def _validate_schedule(schedule: Sequence[float] | None) -> list[float]:
    alphas = [float(a) for a in (schedule or DEFAULT_SCHEDULE)]
    if not alphas:
        raise ValueError("the α schedule is empty")
    if any(a <= 1.0 for a in alphas):
        raise ValueError("every α of the schedule must exceed 1")
    if any(b <= a for a, b in zip(alphas, alphas[1:], strict=False)):
        raise ValueError("the α schedule must be strictly increasing")
    return alphas


def run_trace(
    prob: DoublingProblem,
    schedule: Sequence[float] | None = None,
    threads: int | None = None,
) -> DoublingTrace:
    """
    Run the doubling construction across the schedule and assert the row invariants.
    """

    start = time.perf_counter()
    settings = get_settings()
    alphas = _validate_schedule(schedule)
    strict = strict_bound(prob)
    eps, phi, scale = prob.eps, prob.phi, prob.tolerance_scale
    cloud, enlargements = prob.cloud, 0
    tracker = _Tracker(ROW_INVARIANTS)
    rows: list[TraceRow] = []
    row_reports: list[CheckReport] = []
    previous: tuple[float, SampleCloud] | None = None
    last_state: RowState | None = None

    for index, alpha in enumerate(alphas):
        while True:
            lam = assemble_lambda(prob, alpha, cloud, threads)
            peak = lam.maximize()
            if not peak.on_boundary:
                break
            if enlargements >= settings.MAX_CLOUD_ENLARGEMENTS:
                raise CloudTooCoarseError(
                    f"Λ optimizer at α={alpha:g} sits on the cloud boundary after "
                    f"{enlargements} enlargements"
                )
            cloud = cloud.enlarged(2.0)
            enlargements += 1
            logger.warning("trace cloud enlarged alpha=%s size=%s", alpha, len(cloud))

        mesh = cloud.mesh
        eta = 1.0 / alpha
        jensen = jensen_perturb(
            lam,
            (peak.y0, peak.y0p),
            prob.family,
            eta,
            prob.eps1,
            prob.eps2,
            kappa=prob.kappa(alpha),
            seed=prob.seed + index,
            candidates=settings.JENSEN_CANDIDATES,
            mesh=mesh,
            sup_value=peak.value,
            tolerance_scale=scale,
        )
        state = RowState(
            alpha=alpha,
            lam=lam,
            peak=peak,
            jensen=jensen,
            x=lam.pu.argopt(jensen.y),
            xp=lam.pv.argopt(jensen.yp),
        )
        pair = build_test_functions(prob, state)
        row_reports.append(pair.report)
        gap = hamiltonian_gap(prob, state, pair)
        bound, parts = gap_bound(prob, state, strict)

        slack = scale * (SANDWICH_TOLERANCE * (1.0 + abs(peak.value)) + alpha * mesh * mesh)
        sandwich = prob.sandwich_bound(alpha)
        base1, base2 = state.xi_fields(prob.family, "xi0")
        xi0 = -prob.eps1 * base1.value(state.y) - prob.eps2 * base2.value(state.yp)
        tracker.record(
            "displacement",
            jensen.displacement - (eta + mesh),
            alpha=alpha,
            value=jensen.displacement,
        )
        tracker.record(
            "xi0_sandwich", max(-xi0, xi0 - sandwich) - slack, alpha=alpha, value=xi0
        )
        tracker.record(
            "lambda_sandwich",
            max(peak.value - jensen.value, jensen.value - peak.value - sandwich) - slack,
            alpha=alpha,
            sup_lambda=peak.value,
            lambda_hat=jensen.value,
        )
        if previous is not None and previous[1] is cloud:
            tracker.record(
                "sup_lambda_monotone",
                peak.value - previous[0] - slack,
                alpha=alpha,
                previous=previous[0],
                current=peak.value,
            )
        previous = (peak.value, cloud)

        k_pts = _snap(cloud, prob.K.points)
        lhs = float(np.max(prob.u.values(k_pts) - prob.v.values(k_pts)))
        rhs = (
            prob.u.value(state.x) / (1.0 - eps)
            - prob.v.value(state.xp) / (1.0 + eps)
            + 2.0 * eps / (1.0 - eps**2) * (1.0 - phi) * float(np.max(prob.V.values(k_pts)))
            + eps
            * float(
                np.max(-prob.u.values(k_pts) / (1.0 - eps) - prob.v.values(k_pts) / (1.0 + eps))
            )
            + sandwich
        )
        tracker.record(
            "row_estimate",
            lhs - rhs - scale * SANDWICH_TOLERANCE * (1.0 + abs(rhs)),
            alpha=alpha,
            lhs=lhs,
            rhs=rhs,
        )

        y, yp, x, xp = state.y, state.yp, state.x, state.xp
        chain = (
            float(np.linalg.norm(x - y))
            + float(np.linalg.norm(y - yp))
            + float(np.linalg.norm(yp - xp))
        )
        d0 = peak.y0 - peak.y0p
        row = TraceRow(
            alpha=alpha,
            cloud_size=len(cloud),
            mesh=mesh,
            y0=peak.y0,
            y0p=peak.y0p,
            p=jensen.p1,
            pp=jensen.p2,
            y=y,
            yp=yp,
            x=x,
            xp=xp,
            alpha_d2_0=alpha * float(d0 @ d0),
            alpha_chain=alpha * chain * chain,
            sup_lambda=peak.value,
            lambda_hat=jensen.value,
            xi0_sandwich=xi0,
            sandwich_bound=sandwich,
            displacement=jensen.displacement,
            row_lhs=lhs,
            row_rhs=rhs,
            gap=gap,
            gap_bound=bound,
            m1=pair.m1,
            m2=pair.m2,
            jensen_candidate=jensen.candidate,
        )
        rows.append(row)
        last_state = state
        logger.info(
            "trace row alpha=%s sup_lambda=%s alpha_d2_0=%s gap=%s gap_bound=%s",
            alpha,
            peak.value,
            row.alpha_d2_0,
            gap,
            bound,
        )

    report, summary = _summarize(prob, rows, row_reports, tracker, strict, last_state, enlargements)
    report = report.model_copy(update={"runtime_ms": (time.perf_counter() - start) * 1000.0})
    logger.info("trace finished rows=%s status=%s", len(rows), report.status.value)
    return DoublingTrace(rows=rows, report=report, summary=summary, strict=strict, cloud=cloud)


def _nonincreasing(values: list[float], tol: float = 1e-12) -> bool:
    return all(b <= a + tol * (1.0 + abs(a)) for a, b in zip(values, values[1:], strict=False))


def _summarize(
    prob: DoublingProblem,
    rows: list[TraceRow],
    row_reports: list[CheckReport],
    tracker: _Tracker,
    strict: StrictBound,
    last: RowState | None,
    enlargements: int,
) -> tuple[CheckReport, TraceSummary]:
    final = rows[-1]
    flags = [*strict.flags]
    items = [tracker.item(name) for name in ROW_INVARIANTS]
    for name in ("squeeze", "gradient_identity", "unique_max"):
        sub = [item for report in row_reports for item in report.items if item.name == name]
        failed = [item for item in sub if item.status == CheckStatus.FAIL]
        warned = [item for item in sub if item.status == CheckStatus.WARN]
        pick = failed[0] if failed else (warned[0] if warned else sub[-1])
        items.append(
            pick.model_copy(
                update={"max_violation": max(item.max_violation for item in sub)}
            )
        )

    tail = rows[len(rows) // 2 :]
    liminf = min(row.gap for row in tail)
    gap_excess = liminf - final.gap_bound - SANDWICH_TOLERANCE * prob.tolerance_scale * (
        1.0 + abs(final.gap_bound)
    )
    items.append(
        CheckReport(
            name="hamiltonian_gap_bound",
            status=CheckStatus.PASS if gap_excess <= 0 else CheckStatus.FAIL,
            max_violation=max(gap_excess, 0.0),
            witness={} if gap_excess <= 0 else {"liminf_gap": liminf, "bound": final.gap_bound},
            constants={"liminf_gap": liminf, "bound": final.gap_bound, "tail_rows": len(tail)},
            notes=[RECONSTRUCTION_NOTE],
        )
    )

    assert last is not None
    limit_value = prob.V.value(last.peak.y0)
    outside = limit_value - strict.level
    items.append(
        CheckReport(
            name="limit_point",
            status=CheckStatus.PASS if outside <= 0 else CheckStatus.FAIL,
            max_violation=max(outside, 0.0),
            witness={} if outside <= 0 else {"y0": last.peak.y0, "V": limit_value},
            constants={"V_at_y0": limit_value, "level": strict.level},
        )
    )
    coalesced = final.alpha_d2_0 < COALESCENCE_TARGET
    items.append(
        CheckReport(
            name="optimizer_coalescence",
            status=CheckStatus.PASS if coalesced else CheckStatus.WARN,
            message="" if coalesced else f"final α·d² = {final.alpha_d2_0:.3e}",
            constants={"final_alpha_d2_0": final.alpha_d2_0, "target": COALESCENCE_TARGET},
        )
    )

    trend: dict[str, bool | None]
    if len(rows) < 2:
        flags.append("no trend data")
        trend = {"alpha_d2_0_nonincreasing": None, "gap_nonincreasing": None}
    else:
        trend = {
            "alpha_d2_0_nonincreasing": _nonincreasing([row.alpha_d2_0 for row in rows]),
            "gap_nonincreasing": _nonincreasing([row.gap for row in rows]),
        }

    report = CheckReport.from_items(
        "doubling_trace",
        items,
        constants={
            "strict": strict.as_dict(),
            "eps": prob.eps,
            "phi": prob.phi,
            "lambda": prob.lam,
            "family": prob.family.as_dict(),
            "cloud": prob.cloud.as_dict(),
        },
        notes=[SURROGATE_NOTE, RECONSTRUCTION_NOTE, *flags],
    )
    summary = TraceSummary(
        rows=len(rows),
        schedule=[row.alpha for row in rows],
        final={
            "alpha": final.alpha,
            "alpha_d2_0": final.alpha_d2_0,
            "alpha_chain": final.alpha_chain,
            "sup_lambda": final.sup_lambda,
            "gap": final.gap,
            "gap_bound": final.gap_bound,
        },
        liminf_gap=liminf,
        gap_bound=final.gap_bound,
        strict=strict.as_dict(),
        trend=trend,
        enlargements=enlargements,
        flags=flags,
        passed=report.passed,
    )
    return report, summary


__all__ = [
    "DEFAULT_SCHEDULE",
    "DoublingProblem",
    "DoublingTrace",
    "JensenResult",
    "LambdaField",
    "LambdaPeak",
    "RowState",
    "StrictBound",
    "TouchingPair",
    "assemble_lambda",
    "build_test_functions",
    "gap_bound",
    "hamiltonian_gap",
    "jensen_perturb",
    "run_trace",
    "strict_bound",
]
