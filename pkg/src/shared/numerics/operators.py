"""
Hamiltonians built from drift + convex first-order parts, diffusions, finite-atom jump
operators, sums and finite Bellman/Isaacs combinators, with sampled checks of their
structural hypotheses.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from typing import Any, Protocol

import numpy as np
import numpy.typing as npt
from scipy.spatial import cKDTree

from shared.numerics.envelope import envelope_certified, fit_envelope
from shared.numerics.errors import (
    DimensionMismatchError,
    IsaacsError,
    MeasureError,
    MissingDerivativeError,
    NonFiniteValueError,
    NumericsError,
)
from shared.numerics.funcspace import (
    FunctionField,
    Matrix,
    Point,
    SampleCloud,
    ScalarField,
    Smoothness,
    Vector,
    as_point,
    quadratic_field,
)
from shared.numerics.parallel import parallel_map
from shared.schemas.reports import CheckReport, CheckStatus

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-10
CONVEXITY_TOLERANCE = 1e-10
ISAACS_TOLERANCE = 1e-10
PLATEAU_TOLERANCE = 1e-6
UNVERIFIED_DENSENESS = (
    "domain denseness of test functions has no finite-dimensional analogue; not verified"
)


# ---------------------------------------------------------------------------
# cut profile and the weight W
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CutProfile:
    """
    Non-increasing profile l: 1 on [0, r0], 0 on [1, ∞), cubic smoothstep between.

    χ_{B₁(0)}(z) := l(|z|).
    """

    r0: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.r0 < 1.0:
            raise ValueError("cut profile needs 0 < r0 < 1")

    def __call__(self, r: npt.ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        t = np.clip((r - self.r0) / (1.0 - self.r0), 0.0, 1.0)
        return 1.0 - t * t * (3.0 - 2.0 * t)

    def derivative(self, r: npt.ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        width = 1.0 - self.r0
        t = (r - self.r0) / width
        inside = (t > 0.0) & (t < 1.0)
        return np.where(inside, -6.0 * t * (1.0 - t) / width, 0.0)

    def chi(self, z: npt.ArrayLike) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        return self(np.linalg.norm(z, axis=1))


DEFAULT_CUT = CutProfile()


def weight_w(z: npt.ArrayLike, cut: CutProfile = DEFAULT_CUT) -> np.ndarray:
    """
    W(z) = χ(z)|z|² + (1 − χ(z))·log(1 + |z|²), row-wise.
    """

    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    sq = np.sum(z * z, axis=1)
    chi = cut(np.sqrt(sq))
    return chi * sq + (1.0 - chi) * np.log1p(sq)


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteMeasure:
    """
    Finite atom list Σ w_i δ_{z_i} with no atom at the origin.
    """

    atoms: npt.NDArray[np.float64]
    weights: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        atoms = np.array(self.atoms, dtype=np.float64, copy=True)
        weights = np.array(self.weights, dtype=np.float64, copy=True).reshape(-1)
        if atoms.ndim == 1:
            atoms = atoms.reshape(-1, 1)
        if atoms.shape[0] != weights.size:
            raise MeasureError(f"{atoms.shape[0]} atoms but {weights.size} weights")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise MeasureError("measure atoms and weights must be finite")
        if np.any(weights < 0):
            bad = int(np.flatnonzero(weights < 0)[0])
            raise MeasureError(f"negative weight {weights[bad]} at atom {atoms[bad].tolist()}")
        if atoms.size and np.any(np.all(atoms == 0.0, axis=1)):
            raise MeasureError("atom at the origin")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def empty(cls, dim: int) -> DiscreteMeasure:
        return cls(atoms=np.zeros((0, dim)), weights=np.zeros(0))

    @classmethod
    def from_pairs(cls, pairs: list[tuple[Any, float]], dim: int) -> DiscreteMeasure:
        """
        Build from (atom, weight) pairs, dropping atoms that land exactly on the origin.
        """

        kept = [(as_point(z, dim), float(w)) for z, w in pairs]
        kept = [(z, w) for z, w in kept if np.any(z != 0.0)]
        if not kept:
            return cls.empty(dim)
        return cls(atoms=np.stack([z for z, _ in kept]), weights=np.array([w for _, w in kept]))

    @property
    def dim(self) -> int:
        return int(self.atoms.shape[1])

    def __len__(self) -> int:
        return int(self.weights.size)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def w_integral(self, cut: CutProfile = DEFAULT_CUT) -> float:
        if len(self) == 0:
            return 0.0
        return float(self.weights @ weight_w(self.atoms, cut))

    def integrate(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        if len(self) == 0:
            return 0.0
        return float(self.weights @ np.asarray(g(self.atoms), dtype=np.float64))

    def grouped(self) -> dict[tuple[float, ...], float]:
        out: dict[tuple[float, ...], float] = {}
        for z, w in zip(self.atoms, self.weights, strict=True):
            key = tuple(float(c) for c in z)
            out[key] = out.get(key, 0.0) + float(w)
        return out


# ---------------------------------------------------------------------------
# operator tree
# ---------------------------------------------------------------------------


class Hamiltonian(Protocol):
    def apply(self, f: ScalarField, x: Point) -> float: ...

    def leaves(self) -> Iterator[Hamiltonian]: ...


def _finite(value: float, what: str, x: Point) -> float:
    if not math.isfinite(value):
        raise NonFiniteValueError(f"{what} is not finite at x={x.tolist()}")
    return value


@dataclass(frozen=True)
class DriftConvexOp:
    """
    𝔹f(x) = ⟨b(x), ∇f(x)⟩ + 𝓗(∇f(x)); ``hconv=None`` means 𝓗 ≡ 0.
    """

    b: Callable[[Point], Vector]
    hconv: Callable[[Vector], float] | None = None
    lipschitz: float | None = None
    growth: float | None = None
    label: str = "drift"
    b_values: Callable[[np.ndarray], np.ndarray] | None = None

    def drift(self, x: Point) -> Vector:
        return np.asarray(self.b(x), dtype=np.float64).reshape(x.size)

    def drift_at(self, points: np.ndarray) -> np.ndarray:
        if self.b_values is not None:
            return np.asarray(self.b_values(points), dtype=np.float64).reshape(points.shape)
        return np.stack([self.drift(p) for p in points])

    def convex_part(self, p: Vector) -> float:
        return 0.0 if self.hconv is None else float(self.hconv(p))

    def hamiltonian(self, x: Point, p: Vector) -> float:
        """
        𝓑(x, p) = ⟨b(x), p⟩ + 𝓗(p).
        """

        return float(self.drift(x) @ p) + self.convex_part(p)

    def apply(self, f: ScalarField, x: Point) -> float:
        if not f.has_gradient:
            raise MissingDerivativeError(f"{self.label} needs the gradient of {f.label}")
        return _finite(self.hamiltonian(x, f.gradient(x)), self.label, x)

    def leaves(self) -> Iterator[Hamiltonian]:
        yield self


@dataclass(frozen=True)
class DiffusionOp:
    """
    𝔸f(x) = ½ Tr(Σ(x)Σ(x)ᵀ D²f(x)).
    """

    sigma: Callable[[Point], Matrix]
    lipschitz: float | None = None
    growth: float | None = None
    label: str = "diffusion"

    def sigma_at(self, x: Point) -> Matrix:
        s = np.atleast_2d(np.asarray(self.sigma(x), dtype=np.float64))
        if s.shape[0] != x.size:
            raise DimensionMismatchError(f"Σ(x) has {s.shape[0]} rows for a {x.size}-dim point")
        return s

    def covariance(self, x: Point) -> Matrix:
        s = self.sigma_at(x)
        a = s @ s.T
        low = float(np.min(np.linalg.eigvalsh(a)))
        if low < -PSD_TOLERANCE:
            raise NumericsError(f"ΣΣᵀ not positive semi-definite at {x.tolist()} (λmin={low})")
        return a

    def apply(self, f: ScalarField, x: Point) -> float:
        if not f.has_hessian:
            raise MissingDerivativeError(f"{self.label} needs the hessian of {f.label}")
        return _finite(0.5 * float(np.sum(self.covariance(x) * f.hessian(x))), self.label, x)

    def leaves(self) -> Iterator[Hamiltonian]:
        yield self


@dataclass(frozen=True)
class JumpOp:
    """
    𝔸f(x) = Σ_i w_i [f(x+z_i) − f(x) − χ(z_i)⟨z_i, ∇f(x)⟩] for μ_x = Σ_i w_i δ_{z_i}.

    The gradient of f is only requested when some atom has χ(z) > 0.
    """

    mu: Callable[[Point], DiscreteMeasure]
    cut: CutProfile = DEFAULT_CUT
    label: str = "jump"

    def measure(self, x: Point) -> DiscreteMeasure:
        m = self.mu(x)
        if len(m) and m.dim != x.size:
            raise DimensionMismatchError(f"μ_x atoms have dimension {m.dim}, point has {x.size}")
        return m

    def apply(self, f: ScalarField, x: Point) -> float:
        m = self.measure(x)
        if len(m) == 0:
            return 0.0
        increments = f.values(x + m.atoms) - f.value(x)
        chi = self.cut.chi(m.atoms)
        total = float(m.weights @ increments)
        if np.any(chi > 0):
            if not f.has_gradient:
                raise MissingDerivativeError(f"{self.label} needs the gradient of {f.label}")
            total -= float(m.weights @ (chi * (m.atoms @ f.gradient(x))))
        return _finite(total, self.label, x)

    def leaves(self) -> Iterator[Hamiltonian]:
        yield self


@dataclass(frozen=True)
class SumOp:
    terms: tuple[Hamiltonian, ...] = ()
    label: str = "sum"

    def apply(self, f: ScalarField, x: Point) -> float:
        return float(sum(term.apply(f, x) for term in self.terms))

    def leaves(self) -> Iterator[Hamiltonian]:
        for term in self.terms:
            yield from term.leaves()


@dataclass(frozen=True)
class CostFunctional:
    """
    𝓘(x, θ₁, θ₂) as an |Θ₁|×|Θ₂| table per point; +∞ marks an absent control.
    """

    table: Callable[[Point], np.ndarray]
    theta1: tuple[str, ...]
    theta2: tuple[str, ...]
    modulus: Callable[[float], float] | None = None

    def at(self, x: Point) -> np.ndarray:
        values = np.asarray(self.table(x), dtype=np.float64).reshape(
            len(self.theta1), len(self.theta2)
        )
        if np.any(np.isnan(values)) or np.any(values == -np.inf):
            raise NumericsError(f"cost takes a NaN or −∞ value at {x.tolist()}")
        return values

    @classmethod
    def zero(cls, theta1: tuple[str, ...], theta2: tuple[str, ...]) -> CostFunctional:
        shape = (len(theta1), len(theta2))
        return cls(table=lambda x: np.zeros(shape), theta1=theta1, theta2=theta2)


def sup_inf(payoff: np.ndarray) -> float:
    """
    max over rows of the min over finite entries; −∞ entries are absent controls.
    """

    rows = []
    for i, row in enumerate(payoff):
        finite = row[np.isfinite(row)]
        if finite.size == 0:
            raise IsaacsError(f"every minimizing control is excluded for row {i}")
        rows.append(float(np.min(finite)))
    return max(rows)


def inf_sup(payoff: np.ndarray) -> float:
    cols = []
    for col in payoff.T:
        finite = col[np.isfinite(col)]
        if finite.size:
            cols.append(float(np.max(finite)))
    if not cols:
        raise IsaacsError("no admissible control pair")
    return min(cols)


@dataclass(frozen=True)
class IsaacsOp:
    """
    sup_{θ₁} inf_{θ₂} {(𝔸+𝔹)_{θ₁θ₂} f(x) − 𝓘(x, θ₁, θ₂)} over finite grids.
    """

    components: dict[tuple[int, int], Hamiltonian]
    cost: CostFunctional
    label: str = "isaacs"

    def __post_init__(self) -> None:
        n1, n2 = len(self.cost.theta1), len(self.cost.theta2)
        if n1 == 0 or n2 == 0:
            raise NumericsError("Isaacs nodes need nonempty control grids")
        missing = [(i, j) for i in range(n1) for j in range(n2) if (i, j) not in self.components]
        if missing:
            raise NumericsError(f"Isaacs node lacks components for {missing}")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cost.theta1), len(self.cost.theta2)

    def payoff(self, f: ScalarField, x: Point) -> np.ndarray:
        costs = self.cost.at(x)
        n1, n2 = self.shape
        out = np.full((n1, n2), -np.inf)
        for i in range(n1):
            for j in range(n2):
                if np.isfinite(costs[i, j]):
                    out[i, j] = self.components[(i, j)].apply(f, x) - costs[i, j]
        return out

    def apply(self, f: ScalarField, x: Point) -> float:
        return sup_inf(self.payoff(f, x))

    def apply_inf_sup(self, f: ScalarField, x: Point) -> float:
        return inf_sup(self.payoff(f, x))

    def leaves(self) -> Iterator[Hamiltonian]:
        for key in sorted(self.components):
            yield from self.components[key].leaves()


def evaluate(op: Hamiltonian, f: ScalarField, x: Any) -> float:
    """
    ℍf(x) for any operator tree.
    """

    return op.apply(f, as_point(x, f.dim))


def stochastic_part(op: Hamiltonian) -> SumOp:
    """
    The linear part 𝔸 (diffusion and jump leaves) of a non-Isaacs operator tree.
    """

    if isinstance(op, IsaacsOp):
        raise NumericsError("the stochastic part is defined per Isaacs component")
    return SumOp(
        terms=tuple(leaf for leaf in op.leaves() if isinstance(leaf, (DiffusionOp, JumpOp))),
        label="stochastic",
    )


def drift_parts(op: Hamiltonian) -> list[DriftConvexOp]:
    return [leaf for leaf in op.leaves() if isinstance(leaf, DriftConvexOp)]


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def _elapsed(start: float) -> float:
    return (time.perf_counter() - start) * 1000.0


def check_convex_hamiltonian(
    op: DriftConvexOp, momenta: np.ndarray, tolerance_scale: float = 1.0
) -> CheckReport:
    """
    Midpoint-type convexity of 𝓗 on segments between consecutive sampled momenta.
    """

    start = time.perf_counter()
    if op.hconv is None or len(momenta) < 2:
        return CheckReport(name="convex_hamiltonian", status=CheckStatus.PASS, message="𝓗 ≡ 0")
    worst, witness = 0.0, {}
    for a, b in zip(momenta[:-1], momenta[1:], strict=True):
        ha, hb = op.convex_part(a), op.convex_part(b)
        for t in (0.25, 0.5, 0.75):
            mid = op.convex_part(t * a + (1.0 - t) * b)
            bound = t * ha + (1.0 - t) * hb
            excess = mid - bound - CONVEXITY_TOLERANCE * tolerance_scale * (1.0 + abs(bound))
            if excess > worst:
                worst, witness = excess, {"p": a, "p_prime": b, "t": t}
    return CheckReport(
        name="convex_hamiltonian",
        status=CheckStatus.FAIL if worst > 0 else CheckStatus.PASS,
        max_violation=worst,
        witness=witness,
        runtime_ms=_elapsed(start),
    )


def _pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(n, k=1)
    return i, j


def check_semi_monotone(
    op: DriftConvexOp, K: SampleCloud, alphas: list[float], tolerance_scale: float = 1.0
) -> CheckReport:
    """
    𝓑(x, α(x−x′)) − 𝓑(x′, α(x−x′)) ≤ ω(α d²(x,x′) + d(x,x′)) with a certified envelope ω.
    """

    start = time.perf_counter()
    if any(a <= 1.0 for a in alphas):
        raise ValueError("semi-monotonicity is checked for α > 1")
    pts = K.points
    drift = op.drift_at(pts)
    i, j = _pair_indices(len(pts))
    diff_x = pts[i] - pts[j]
    diff_b = drift[i] - drift[j]
    dist_sq = np.sum(diff_x * diff_x, axis=1)
    dist = np.sqrt(dist_sq)
    inner = np.sum(diff_b * diff_x, axis=1)

    lhs_all, r_all, d_all, alpha_all = [], [], [], []
    for alpha in alphas:
        lhs_all.append(alpha * inner)
        r_all.append(alpha * dist_sq + dist)
        d_all.append(dist)
        alpha_all.append(np.full(dist.size, alpha))
    lhs = np.concatenate(lhs_all) if lhs_all else np.zeros(0)
    r = np.concatenate(r_all) if r_all else np.zeros(0)
    d = np.concatenate(d_all) if d_all else np.zeros(0)
    alpha_v = np.concatenate(alpha_all) if alpha_all else np.zeros(0)

    fit = fit_envelope(r, lhs, d)
    certified = envelope_certified(fit, tolerance_scale)
    witness: dict[str, Any] = {}
    if lhs.size:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(r > 0, lhs / np.where(r > 0, r, 1.0), 0.0)
        k = int(np.argmax(ratio))
        pair = k % dist.size
        witness = {
            "x": pts[i[pair]],
            "x_prime": pts[j[pair]],
            "alpha": alpha_v[k],
            "lhs": lhs[k],
            "abscissa": r[k],
        }
    positive = inner[dist_sq > 0] / dist_sq[dist_sq > 0] if np.any(dist_sq > 0) else np.zeros(0)
    modulus = CheckReport(
        name="modulus",
        status=CheckStatus.PASS if certified else CheckStatus.FAIL,
        message="" if certified else "no modulus with ω(0)=0 survives pair coalescence",
        max_violation=0.0 if certified else max(fit.value_at_zero, fit.coalescence_exponent),
        witness=witness,
        envelope=fit,
    )
    momenta = (np.asarray(alphas, dtype=np.float64)[:, None, None] * diff_x[None, :100, :]).reshape(
        -1, K.dim
    )
    convex = check_convex_hamiltonian(op, momenta, tolerance_scale)
    report = CheckReport.from_items(
        "semi_monotone",
        [modulus, convex],
        envelope=fit,
        constants={
            "alphas": list(alphas),
            "one_sided_lipschitz": float(np.max(positive)) if positive.size else 0.0,
            "cloud": K.as_dict(),
        },
        runtime_ms=_elapsed(start),
    )
    logger.info("semi-monotone check op=%s status=%s", op.label, report.status.value)
    return report


def check_isaacs(
    op: IsaacsOp, f: ScalarField, K: SampleCloud, tolerance_scale: float = 1.0
) -> CheckReport:
    """
    Max over K of inf_sup − sup_inf of the payoff (𝔸+𝔹)_{θ₁θ₂}f − 𝓘.
    """

    start = time.perf_counter()

    def gap_at(x: Point) -> tuple[float, float, float]:
        payoff = op.payoff(f, x)
        lower, upper = sup_inf(payoff), inf_sup(payoff)
        return upper - lower, lower, upper

    gaps = parallel_map(gap_at, list(K.points))
    values = np.array([abs(g[0]) for g in gaps])
    k = int(np.argmax(values))
    worst = float(values[k])
    holds = worst <= ISAACS_TOLERANCE * tolerance_scale
    return CheckReport(
        name="isaacs",
        status=CheckStatus.PASS if holds else CheckStatus.FAIL,
        message="" if holds else "sup-inf and inf-sup differ",
        max_violation=worst,
        witness={"x": K.points[k], "sup_inf": gaps[k][1], "inf_sup": gaps[k][2]},
        constants={"gap": worst, "controls": list(op.shape), "cloud": K.as_dict()},
        runtime_ms=_elapsed(start),
    )


@dataclass(frozen=True)
class LyapunovBound:
    value: float
    plateaued: bool
    history: list[tuple[float, float]] = field(default_factory=list)
    witness: list[float] = field(default_factory=list)

    def report(self) -> CheckReport:
        settled = self.plateaued and math.isfinite(self.value)
        status = CheckStatus.PASS if settled else CheckStatus.WARN
        return CheckReport(
            name="lyapunov",
            status=status,
            message="" if self.plateaued else "running sup still growing on nested clouds",
            witness={"x": self.witness},
            constants={
                "c_V": self.value,
                "history": [list(h) for h in self.history],
                "note": UNVERIFIED_DENSENESS,
            },
        )


def lyapunov_integrand(op: Hamiltonian, V: ScalarField, x: Point) -> float:
    """
    sup over (θ₁, θ₂) of (𝔸+𝔹)_{θ₁θ₂}V(x) − 𝓘(x, θ₁, θ₂); plain ℍV(x) off Isaacs nodes.
    """

    if isinstance(op, IsaacsOp):
        payoff = op.payoff(V, x)
        finite = payoff[np.isfinite(payoff)]
        return float(np.max(finite)) if finite.size else -math.inf
    return op.apply(V, x)


def lyapunov_bound(
    op: Hamiltonian, V: ScalarField, K: SampleCloud, levels: int = 10
) -> LyapunovBound:
    """
    Sampled c_V over nested clouds K·2^k, k = 0..levels, with plateau detection.
    """

    if not (V.has_gradient and V.has_hessian):
        raise MissingDerivativeError("the containment function needs gradient and hessian")
    running, best_x = -math.inf, None
    history: list[tuple[float, float]] = []
    for k in range(levels + 1):
        cloud = K.scaled(2.0**k)
        values = parallel_map(lambda x: lyapunov_integrand(op, V, x), list(cloud.points))
        idx = int(np.argmax(values))
        if values[idx] > running:
            running, best_x = float(values[idx]), cloud.points[idx]
        history.append((2.0**k, running))
        logger.debug("lyapunov level=%s sup=%s", k, running)
    plateaued = len(history) < 2 or abs(history[-1][1] - history[-2][1]) <= PLATEAU_TOLERANCE * (
        1.0 + abs(history[-1][1])
    )
    return LyapunovBound(
        value=running,
        plateaued=plateaued,
        history=history,
        witness=[] if best_x is None else [float(c) for c in best_x],
    )


def _log_containment(points: np.ndarray) -> np.ndarray:
    return np.log1p(0.5 * np.sum(points * points, axis=1))


def _pairing_battery(cut: CutProfile) -> list[Callable[[np.ndarray], np.ndarray]]:
    def make(a: float) -> Callable[[np.ndarray], np.ndarray]:
        return lambda z: weight_w(z, cut) * np.cos(a * z[:, 0])

    return [make(a) for a in (0.0, 1.0, 2.0)]


def check_measure_family(
    mu: Callable[[Point], DiscreteMeasure],
    K: SampleCloud,
    cut: CutProfile = DEFAULT_CUT,
    mass_bound: float = 1e6,
    tolerance_scale: float = 1.0,
) -> CheckReport:
    """
    ∫W dμ_x finite and uniformly bounded on K, and continuity of x ↦ ∫g dμ_x for a
    fixed battery g ∈ C_W compared across nearest cloud neighbours.
    """

    start = time.perf_counter()
    measures = [mu(x) for x in K.points]
    w_mass = np.array([m.w_integral(cut) for m in measures])
    k = int(np.argmax(w_mass))
    bounded = bool(np.all(np.isfinite(w_mass))) and w_mass[k] <= mass_bound * tolerance_scale
    mass_item = CheckReport(
        name="w_integrable",
        status=CheckStatus.PASS if bounded else CheckStatus.FAIL,
        message="" if bounded else "∫W dμ_x not uniformly bounded on the cloud",
        max_violation=0.0 if bounded else float(w_mass[k] - mass_bound),
        witness={"x": K.points[k], "w_integral": w_mass[k]},
        constants={"sup_w_integral": float(w_mass[k]), "mass_bound": mass_bound},
    )

    battery = _pairing_battery(cut)
    pairings = np.array([[m.integrate(g) for g in battery] for m in measures])
    quotient, q_witness = 0.0, {}
    if len(K) > 1:
        dist, idx = cKDTree(K.points).query(K.points, k=2)
        for a in range(len(K)):
            b, d = int(idx[a, 1]), float(dist[a, 1])
            if d <= 0:
                continue
            jump = float(np.max(np.abs(pairings[a] - pairings[b])))
            if jump / d > quotient:
                quotient = jump / d
                q_witness = {"x": K.points[a], "neighbour": K.points[b], "difference": jump}
    continuous = quotient <= mass_bound * tolerance_scale
    continuity_item = CheckReport(
        name="pairing_continuity",
        status=CheckStatus.PASS if continuous else CheckStatus.WARN,
        message="" if continuous else "steep pairing change between neighbouring points",
        witness=q_witness,
        constants={"max_difference_quotient": quotient},
    )

    def containment_increment(x: Point, m: DiscreteMeasure) -> float:
        if len(m) == 0:
            return 0.0
        base = _log_containment(x[None, :])[0]
        return float(m.weights @ (_log_containment(x + m.atoms) - base))

    increments = [containment_increment(x, m) for x, m in zip(K.points, measures, strict=True)]
    integrability = CheckReport(
        name="containment_integrability",
        status=CheckStatus.PASS if np.all(np.isfinite(increments)) else CheckStatus.FAIL,
        constants={"sup_containment_increment": float(np.max(increments))},
        notes=["standing integrability condition checked on the cloud only"],
    )
    return CheckReport.from_items(
        "measure_family",
        [mass_item, continuity_item, integrability],
        constants={"sup_w_integral": float(w_mass[k]), "cloud": K.as_dict()},
        runtime_ms=_elapsed(start),
    )


def bump_field(centers: np.ndarray, amplitudes: np.ndarray, width: float = 1.0) -> FunctionField:
    """
    Σ_k a_k exp(−|x − c_k|²/(2 width²)) with analytic derivatives.
    """

    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    amps = np.asarray(amplitudes, dtype=np.float64).reshape(-1)
    s2 = float(width) ** 2

    def value(x: Point) -> float:
        diff = x - centers
        return float(amps @ np.exp(-np.sum(diff * diff, axis=1) / (2 * s2)))

    def values(pts: np.ndarray) -> np.ndarray:
        diff = pts[:, None, :] - centers[None, :, :]
        return np.exp(-np.sum(diff * diff, axis=2) / (2 * s2)) @ amps

    def gradient(x: Point) -> Vector:
        diff = x - centers
        e = amps * np.exp(-np.sum(diff * diff, axis=1) / (2 * s2))
        return -(e @ diff) / s2

    def hessian(x: Point) -> Matrix:
        diff = x - centers
        e = amps * np.exp(-np.sum(diff * diff, axis=1) / (2 * s2))
        outer = np.einsum("k,ki,kj->ij", e, diff, diff) / s2**2
        return outer - np.sum(e) * np.eye(x.size) / s2

    return FunctionField(
        value_fn=value,
        values_fn=values,
        gradient_fn=gradient,
        hessian_fn=hessian,
        smoothness=Smoothness.CINF,
        dim=centers.shape[1],
        label="bumps",
    )


def check_maximum_principle(
    op: Hamiltonian, K: SampleCloud, bumps: SampleCloud, tolerance_scale: float = 1.0
) -> CheckReport:
    """
    For g₂ a bump field and g₁ = g₂ − |· − x₀|², g₁ − g₂ peaks at x₀, so the operator
    must satisfy ℍg₁(x₀) ≤ ℍg₂(x₀).
    """

    start = time.perf_counter()
    rng = np.random.default_rng(bumps.seed)
    g2 = bump_field(bumps.points, rng.uniform(-1.0, 1.0, len(bumps)))
    worst, witness = 0.0, {}
    for x0 in K.points:
        g1 = g2 - quadratic_field(x0, scale=2.0)
        lhs, rhs = op.apply(g1, x0), op.apply(g2, x0)
        excess = lhs - rhs - 1e-8 * tolerance_scale
        if excess > worst:
            worst, witness = excess, {"x0": x0, "lhs": lhs, "rhs": rhs}
    return CheckReport(
        name="maximum_principle",
        status=CheckStatus.FAIL if worst > 0 else CheckStatus.PASS,
        max_violation=worst,
        witness=witness,
        runtime_ms=_elapsed(start),
    )


def walk_measure(dim: int = 1, weight: float = 1.0) -> DiscreteMeasure:
    """
    Nearest-neighbour random walk Σ_i w(δ_{e_i} + δ_{−e_i}).
    """

    eye = np.eye(dim)
    return DiscreteMeasure(atoms=np.vstack([eye, -eye]), weights=np.full(2 * dim, weight))


def returning_walk_measure(x: Point) -> DiscreteMeasure:
    """
    1-D walk with an extra jump back to the origin: δ₋₁ + δ₁ + δ₋ₓ.
    """

    return DiscreteMeasure.from_pairs([([-1.0], 1.0), ([1.0], 1.0), (-x, 1.0)], dim=1)


def map_measure(eta: Callable[[Point], Vector]) -> Callable[[Point], DiscreteMeasure]:
    """
    x ↦ δ_{η(x)}·1{η(x) ≠ 0}.
    """

    def mu(x: Point) -> DiscreteMeasure:
        z = np.asarray(eta(x), dtype=np.float64).reshape(x.size)
        return DiscreteMeasure.from_pairs([(z, 1.0)], dim=x.size)

    return mu


def reflecting_map(x: Point) -> Vector:
    """
    −1−x for x ≤ −1, 0 on [−1, 1], 1−x for x ≥ 1 (coordinatewise).
    """

    return np.where(x <= -1.0, -1.0 - x, np.where(x >= 1.0, 1.0 - x, 0.0))
