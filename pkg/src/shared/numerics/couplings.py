"""
Operators on E×E declared as couplings of a base operator: synchronous diffusion,
coupled jump measures (synchronous, independent, idling, map-induced, tabulated) and
sums, with sampled certificates for the coupling identity, the maximum principle and
controlled growth.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Iterator
from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np
import numpy.typing as npt

from shared.numerics.envelope import coalescence_exponent, envelope_certified, fit_envelope
from shared.numerics.errors import CouplingError, DimensionMismatchError, MeasureError
from shared.numerics.funcspace import (
    FunctionField,
    Matrix,
    Point,
    SampleCloud,
    ScalarField,
    Smoothness,
    Vector,
    as_point,
    direct_sum,
    quadratic_field,
)
from shared.numerics.operators import (
    DEFAULT_CUT,
    CutProfile,
    DiffusionOp,
    DiscreteMeasure,
    Hamiltonian,
    JumpOp,
    SumOp,
    bump_field,
    stochastic_part,
    walk_measure,
)
from shared.numerics.parallel import parallel_map
from shared.schemas.reports import CheckReport, CheckStatus

logger = logging.getLogger(__name__)

BLOCK_PSD_TOLERANCE = 1e-8
IDENTITY_TOLERANCE = 1e-8
DIVERGENCE_EXPONENT = 1.0
SURPLUS_NOTE = "unequal atom masses coupled to a zero jump on the other side"


@dataclass(frozen=True)
class CoupledMeasure:
    """
    Atoms ((z1, z2), w) on E×E together with the two measures they claim to couple.
    """

    z1: npt.NDArray[np.float64]
    z2: npt.NDArray[np.float64]
    weights: npt.NDArray[np.float64]
    first: DiscreteMeasure
    second: DiscreteMeasure

    def __post_init__(self) -> None:
        z1 = np.atleast_2d(np.asarray(self.z1, dtype=np.float64))
        z2 = np.atleast_2d(np.asarray(self.z2, dtype=np.float64))
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if z1.shape != z2.shape or z1.shape[0] != w.size:
            raise DimensionMismatchError("coupled atoms need matching shapes")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise MeasureError("coupled weights must be finite and nonnegative")
        idle = np.all(z1 == 0.0, axis=1) & np.all(z2 == 0.0, axis=1)
        keep = ~idle & (w > 0)
        object.__setattr__(self, "z1", z1[keep])
        object.__setattr__(self, "z2", z2[keep])
        object.__setattr__(self, "weights", w[keep])

    @property
    def dim(self) -> int:
        return int(self.z1.shape[1])

    def __len__(self) -> int:
        return int(self.weights.size)

    def marginal(self, side: int) -> dict[tuple[float, ...], float]:
        atoms = self.z1 if side == 1 else self.z2
        out: dict[tuple[float, ...], float] = {}
        for z, w in zip(atoms, self.weights, strict=True):
            if np.any(z != 0.0):
                key = tuple(float(c) for c in z)
                out[key] = out.get(key, 0.0) + float(w)
        return out

    def marginal_defect(self) -> tuple[float, dict[str, Any]]:
        """
        Largest mismatch between the coupled marginals and the declared measures, away
        from the origin.
        """

        worst, witness = 0.0, {}
        for side, declared in ((1, self.first), (2, self.second)):
            coupled, target = self.marginal(side), declared.grouped()
            for key in sorted(set(coupled) | set(target)):
                gap = abs(coupled.get(key, 0.0) - target.get(key, 0.0))
                if gap > worst:
                    worst = gap
                    witness = {
                        "side": side,
                        "atom": list(key),
                        "coupled": coupled.get(key, 0.0),
                        "declared": target.get(key, 0.0),
                    }
        return worst, witness

    def transport_cost(self) -> float:
        """
        ∫ d²(z1, z2) dπ.
        """

        if len(self) == 0:
            return 0.0
        diff = self.z1 - self.z2
        return float(self.weights @ np.sum(diff * diff, axis=1))


def _rows(pairs: list[tuple[Any, Any, float]], dim: int) -> tuple[np.ndarray, ...]:
    if not pairs:
        return np.zeros((0, dim)), np.zeros((0, dim)), np.zeros(0)
    z1 = np.array([np.asarray(a, dtype=np.float64).reshape(dim) for a, _, _ in pairs])
    z2 = np.array([np.asarray(b, dtype=np.float64).reshape(dim) for _, b, _ in pairs])
    return z1, z2, np.array([float(w) for _, _, w in pairs])


def synchronous_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure) -> CoupledMeasure:
    """
    Pair equal atoms with the common mass; surplus mass jumps against an idle copy.
    """

    dim = mu.dim if len(mu) else nu.dim
    a, b = mu.grouped(), nu.grouped()
    zero = (0.0,) * dim
    pairs: list[tuple[Any, Any, float]] = []
    for key in sorted(set(a) | set(b)):
        wa, wb = a.get(key, 0.0), b.get(key, 0.0)
        common = min(wa, wb)
        if common > 0:
            pairs.append((key, key, common))
        if wa > common:
            pairs.append((key, zero, wa - common))
        if wb > common:
            pairs.append((zero, key, wb - common))
    z1, z2, w = _rows(pairs, dim)
    return CoupledMeasure(z1=z1, z2=z2, weights=w, first=mu, second=nu)


def independent_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure) -> CoupledMeasure:
    """
    Product measure μ⊗ν: both copies jump, directions independent.
    """

    dim = mu.dim if len(mu) else nu.dim
    pairs = [
        (za, zb, wa * wb)
        for za, wa in zip(mu.atoms, mu.weights, strict=True)
        for zb, wb in zip(nu.atoms, nu.weights, strict=True)
    ]
    z1, z2, w = _rows(pairs, dim)
    return CoupledMeasure(z1=z1, z2=z2, weights=w, first=mu, second=nu)


def idle_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure) -> CoupledMeasure:
    """
    μ⊗δ₀ + δ₀⊗ν: exactly one copy jumps at a time.
    """

    dim = mu.dim if len(mu) else nu.dim
    zero = np.zeros(dim)
    pairs = [(z, zero, w) for z, w in zip(mu.atoms, mu.weights, strict=True)]
    pairs += [(zero, z, w) for z, w in zip(nu.atoms, nu.weights, strict=True)]
    z1, z2, w = _rows(pairs, dim)
    return CoupledMeasure(z1=z1, z2=z2, weights=w, first=mu, second=nu)


CouplingRule = Callable[[DiscreteMeasure, DiscreteMeasure, Point, Point], CoupledMeasure]


def synchronous_rule(
    mu: DiscreteMeasure, nu: DiscreteMeasure, x: Point, x2: Point
) -> CoupledMeasure:
    return synchronous_coupling(mu, nu)


def independent_rule(
    mu: DiscreteMeasure, nu: DiscreteMeasure, x: Point, x2: Point
) -> CoupledMeasure:
    return independent_coupling(mu, nu)


def idle_rule(
    mu: DiscreteMeasure, nu: DiscreteMeasure, x: Point, x2: Point
) -> CoupledMeasure:
    return idle_coupling(mu, nu)


def map_rule(eta: Callable[[Point], Vector]) -> CouplingRule:
    """
    δ_{(η(x), η(x′))}: both copies jump to their image under the same map.
    """

    def rule(mu: DiscreteMeasure, nu: DiscreteMeasure, x: Point, x2: Point) -> CoupledMeasure:
        a = np.asarray(eta(x), dtype=np.float64).reshape(x.size)
        b = np.asarray(eta(x2), dtype=np.float64).reshape(x2.size)
        return CoupledMeasure(
            z1=a[None, :], z2=b[None, :], weights=np.ones(1), first=mu, second=nu
        )

    return rule


def table_rule(rows: Callable[[Point, Point], list[tuple[Any, Any, float]]]) -> CouplingRule:
    def rule(mu: DiscreteMeasure, nu: DiscreteMeasure, x: Point, x2: Point) -> CoupledMeasure:
        z1, z2, w = _rows(rows(x, x2), x.size)
        return CoupledMeasure(z1=z1, z2=z2, weights=w, first=mu, second=nu)

    return rule


# ---------------------------------------------------------------------------
# coupled operators
# ---------------------------------------------------------------------------


class CoupledHamiltonian(Protocol):
    def apply(self, g: ScalarField, x: Point, x2: Point) -> float: ...

    def leaves(self) -> Iterator[CoupledHamiltonian]: ...


@dataclass(frozen=True)
class SyncDiffusion:
    """
    ½ Tr(Σ̂² D²g) with Σ̂ = [Σ(x); Σ(x′)] driven by the same noise.
    """

    base: DiffusionOp
    label: str = "sync_diffusion"

    def block(self, x: Point, x2: Point) -> Matrix:
        stacked = np.vstack([self.base.sigma_at(x), self.base.sigma_at(x2)])
        block = stacked @ stacked.T
        low = float(np.min(np.linalg.eigvalsh(block)))
        if low < -BLOCK_PSD_TOLERANCE:
            raise CouplingError(f"coupled covariance not PSD (λmin={low})")
        return block

    def apply(self, g: ScalarField, x: Point, x2: Point) -> float:
        return 0.5 * float(np.sum(self.block(x, x2) * g.hessian(np.concatenate([x, x2]))))

    def leaves(self) -> Iterator[CoupledHamiltonian]:
        yield self


@dataclass(frozen=True)
class JumpCoupling:
    """
    Σ w [g(x+z1, x′+z2) − g(x,x′) − χ̂(z1,z2)⟨(z1,z2), ∇g(x,x′)⟩], χ̂ = χ(z1)χ(z2).
    """

    base: JumpOp
    rule: CouplingRule
    label: str = "jump_coupling"

    @property
    def cut(self) -> CutProfile:
        return self.base.cut

    def pi(self, x: Point, x2: Point) -> CoupledMeasure:
        return self.rule(self.base.measure(x), self.base.measure(x2), x, x2)

    def chi_hat(self, pi: CoupledMeasure) -> np.ndarray:
        return self.cut.chi(pi.z1) * self.cut.chi(pi.z2)

    def apply(self, g: ScalarField, x: Point, x2: Point) -> float:
        pi = self.pi(x, x2)
        if len(pi) == 0:
            return 0.0
        w = np.concatenate([x, x2])
        steps = np.hstack([pi.z1, pi.z2])
        total = float(pi.weights @ (g.values(w + steps) - g.value(w)))
        chi = self.chi_hat(pi)
        if np.any(chi > 0):
            total -= float(pi.weights @ (chi * (steps @ g.gradient(w))))
        return total

    def leaves(self) -> Iterator[CoupledHamiltonian]:
        yield self


@dataclass(frozen=True)
class CouplingSum:
    terms: tuple[CoupledHamiltonian, ...] = ()
    label: str = "coupling_sum"

    def apply(self, g: ScalarField, x: Point, x2: Point) -> float:
        return float(sum(term.apply(g, x, x2) for term in self.terms))

    def leaves(self) -> Iterator[CoupledHamiltonian]:
        for term in self.terms:
            yield from term.leaves()


@dataclass(frozen=True)
class CouplingSpec:
    """
    A coupled operator Ĥ together with the base operator it couples.
    """

    root: CoupledHamiltonian
    base: Hamiltonian
    notes: tuple[str, ...] = ()

    def jump_leaves(self) -> list[JumpCoupling]:
        return [leaf for leaf in self.root.leaves() if isinstance(leaf, JumpCoupling)]


def couple(op: Hamiltonian, rule: CouplingRule = synchronous_rule) -> CouplingSpec:
    """
    Couple the stochastic part of ``op``: diffusions synchronously, jumps by ``rule``.
    """

    base = stochastic_part(op)
    terms: list[CoupledHamiltonian] = []
    for leaf in base.terms:
        if isinstance(leaf, DiffusionOp):
            terms.append(SyncDiffusion(base=leaf))
        elif isinstance(leaf, JumpOp):
            terms.append(JumpCoupling(base=leaf, rule=rule))
    notes = (SURPLUS_NOTE,) if rule is synchronous_rule else ()
    return CouplingSpec(root=CouplingSum(terms=tuple(terms)), base=base, notes=notes)


def eval_coupling(c: CouplingSpec, g: ScalarField, x: Any, x2: Any) -> float:
    a, b = as_point(x), as_point(x2)
    if a.size != b.size or (g.dim is not None and g.dim != 2 * a.size):
        raise DimensionMismatchError("coupled fields live on R^{2q}")
    return c.root.apply(g, a, b)


def shifted_half_distance(z1: Any, z2: Any, alpha: float = 1.0) -> FunctionField:
    """
    (a, b) ↦ (α/2)|(a − z1) − (b − z2)|² on R^{2q}.
    """

    s1, s2 = as_point(z1), as_point(z2)
    q = s1.size
    a_ = float(alpha)
    hess = a_ * np.block([[np.eye(q), -np.eye(q)], [-np.eye(q), np.eye(q)]])

    def value(w: Point) -> float:
        u = (w[:q] - s1) - (w[q:] - s2)
        return 0.5 * a_ * float(u @ u)

    def values(pts: np.ndarray) -> np.ndarray:
        u = (pts[:, :q] - s1) - (pts[:, q:] - s2)
        return 0.5 * a_ * np.sum(u * u, axis=1)

    def gradient(w: Point) -> Vector:
        u = (w[:q] - s1) - (w[q:] - s2)
        return a_ * np.concatenate([u, -u])

    return FunctionField(
        value_fn=value,
        values_fn=values,
        gradient_fn=gradient,
        hessian_fn=lambda w: hess.copy(),
        smoothness=Smoothness.CINF,
        dim=2 * q,
        label="half_distance",
    )


def _elapsed(start: float) -> float:
    return (time.perf_counter() - start) * 1000.0


def _split(w: np.ndarray, parts: int) -> list[np.ndarray]:
    if w.size % parts:
        raise DimensionMismatchError(f"cloud dimension {w.size} is not divisible by {parts}")
    return np.split(w, parts)


def check_coupling_identity(
    c: CouplingSpec,
    f1: ScalarField,
    f2: ScalarField,
    K: SampleCloud,
    tolerance_scale: float = 1.0,
) -> CheckReport:
    """
    |Ĥ(f1⊕f2)(x,x′) − Hf1(x) − Hf2(x′)| on a cloud of pairs.
    """

    start = time.perf_counter()
    q = K.dim // 2
    g = direct_sum(f1, f2, q)

    def gap_at(w: np.ndarray) -> tuple[float, float, float]:
        x, x2 = _split(w, 2)
        lhs = eval_coupling(c, g, x, x2)
        rhs = c.base.apply(f1, x) + c.base.apply(f2, x2)
        return lhs - rhs, lhs, rhs

    results = parallel_map(gap_at, list(K.points))
    worst, witness = 0.0, {}
    for w, (gap, lhs, rhs) in zip(K.points, results, strict=True):
        excess = abs(gap) - IDENTITY_TOLERANCE * tolerance_scale * (1.0 + abs(lhs) + abs(rhs))
        if excess > worst or (not witness and abs(gap) > 0):
            worst = max(worst, excess)
            witness = {"x": w[:q], "x_prime": w[q:], "coupled": lhs, "base_sum": rhs, "gap": gap}
    max_gap = max((abs(r[0]) for r in results), default=0.0)

    defects = []
    for leaf in c.jump_leaves():
        for w in K.points[: min(len(K), 50)]:
            x, x2 = _split(w, 2)
            defect, where = leaf.pi(x, x2).marginal_defect()
            defects.append((defect, where, w))
    marginal = max(defects, key=lambda t: t[0], default=(0.0, {}, None))
    passed = worst <= 0.0
    return CheckReport(
        name="coupling_identity",
        status=CheckStatus.PASS if passed else CheckStatus.FAIL,
        message="" if passed else "coupled operator does not split on direct sums",
        max_violation=max_gap if not passed else 0.0,
        witness=witness if not passed else {},
        constants={"max_gap": max_gap, "max_marginal_defect": marginal[0], "cloud": K.as_dict()},
        notes=list(c.notes),
        runtime_ms=_elapsed(start),
    )


def check_controlled_growth(
    c: CouplingSpec, K: SampleCloud, alphas: list[float], tolerance_scale: float = 1.0
) -> CheckReport:
    """
    Â((α/2)d²_{x−y,x′−y′})(x,x′) against α(d(x,y)+d(y,y′)+d(y′,x′))² + (…) on quadruples.
    """

    start = time.perf_counter()
    if any(a <= 1.0 for a in alphas):
        raise ValueError("controlled growth is checked for α > 1")
    values, abscissa, spread, where = [], [], [], []
    for w in K.points:
        x, x2, y, y2 = _split(w, 4)
        total = float(np.linalg.norm(x - y) + np.linalg.norm(y - y2) + np.linalg.norm(y2 - x2))
        for alpha in alphas:
            g = shifted_half_distance(x - y, x2 - y2, alpha)
            values.append(eval_coupling(c, g, x, x2))
            abscissa.append(alpha * total**2 + total)
            spread.append(total)
            where.append((w, alpha))
    fit = fit_envelope(abscissa, values, spread)
    certified = envelope_certified(fit, tolerance_scale)
    witness: dict[str, Any] = {}
    if values:
        ratio = [v / r if r > 0 else 0.0 for v, r in zip(values, abscissa, strict=True)]
        k = int(np.argmax(ratio))
        w, alpha = where[k]
        witness = {"quadruple": w, "alpha": alpha, "value": values[k], "abscissa": abscissa[k]}
    return CheckReport(
        name="controlled_growth",
        status=CheckStatus.PASS if certified else CheckStatus.FAIL,
        message="" if certified else "coupled distance growth has no modulus",
        max_violation=0.0 if certified else max(fit.value_at_zero, fit.coalescence_exponent),
        witness=witness,
        envelope=fit,
        constants={
            "alphas": list(alphas),
            "max_value": max(values, default=0.0),
            "cloud": K.as_dict(),
        },
        runtime_ms=_elapsed(start),
    )


def check_pi_lipschitz(pi: Callable[[Point, Point], CoupledMeasure], K: SampleCloud) -> float:
    """
    Smallest L with ∫d²(z1,z2)dπ_{x,x′} ≤ L d²(x,x′) on the cloud; +∞ when the ratio
    diverges as pairs coalesce.
    """

    q = K.dim // 2
    ratios, dists = [], []
    for w in K.points:
        x, x2 = w[:q], w[q:]
        d2 = float((x - x2) @ (x - x2))
        if d2 <= 0.0:
            continue
        ratios.append(pi(x, x2).transport_cost() / d2)
        dists.append(math.sqrt(d2))
    if not ratios:
        raise CouplingError("Lipschitz certification needs pairs with x ≠ x′")
    exponent, _ = coalescence_exponent(dists, ratios)
    if exponent > DIVERGENCE_EXPONENT:
        logger.warning("coupling transport cost diverges as pairs coalesce exponent=%s", exponent)
        return math.inf
    return float(max(ratios))


def check_coupling_max_principle(
    c: CouplingSpec, K: SampleCloud, bumps: SampleCloud, tolerance_scale: float = 1.0
) -> CheckReport:
    """
    g₂ a bump field on E×E and g₁ = g₂ − d²(·, (x₀,x₀′)): Ĥg₁ ≤ Ĥg₂ at (x₀,x₀′).
    """

    start = time.perf_counter()
    q = K.dim // 2
    rng = np.random.default_rng(bumps.seed)
    g2 = bump_field(bumps.points, rng.uniform(-1.0, 1.0, len(bumps)))
    worst, witness = 0.0, {}
    for w in K.points:
        g1 = g2 - quadratic_field(w, scale=2.0)
        lhs = eval_coupling(c, g1, w[:q], w[q:])
        rhs = eval_coupling(c, g2, w[:q], w[q:])
        excess = lhs - rhs - 1e-8 * tolerance_scale
        if excess > worst:
            worst, witness = excess, {"x": w[:q], "x_prime": w[q:], "lhs": lhs, "rhs": rhs}
    return CheckReport(
        name="coupling_max_principle",
        status=CheckStatus.FAIL if worst > 0 else CheckStatus.PASS,
        max_violation=worst,
        witness=witness,
        runtime_ms=_elapsed(start),
    )


def check_distance_increment_bound(
    samples: int = 10_000,
    seed: int = 0,
    dim: int = 1,
    cut: CutProfile = DEFAULT_CUT,
    tolerance: float = 1e-10,
) -> CheckReport:
    """
    Compensated increment of ½d²_{x−y,x′−y′} at (x,x′) along (z1,z2) is at most
    (1−½χ̂)d²(z1,z2) + (1−χ̂)·½d²(y,y′).
    """

    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    x, x2, y, y2 = (3.0 * rng.standard_normal((samples, dim)) for _ in range(4))
    z1 = rng.uniform(-2.0, 2.0, (samples, dim))
    z2 = rng.uniform(-2.0, 2.0, (samples, dim))
    s1, s2 = x - y, x2 - y2

    def half_d2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        u = (a - s1) - (b - s2)
        return 0.5 * np.sum(u * u, axis=1)

    u = (x - s1) - (x2 - s2)
    grad_dot = np.sum(z1 * u, axis=1) - np.sum(z2 * u, axis=1)
    chi = cut.chi(z1) * cut.chi(z2)
    increment = half_d2(x + z1, x2 + z2) - half_d2(x, x2) - chi * grad_dot
    bound = (1.0 - 0.5 * chi) * np.sum((z1 - z2) ** 2, axis=1) + (1.0 - chi) * 0.5 * np.sum(
        (y - y2) ** 2, axis=1
    )
    excess = increment - bound - tolerance
    k = int(np.argmax(excess))
    violations = int(np.sum(excess > 0))
    return CheckReport(
        name="distance_increment_bound",
        status=CheckStatus.FAIL if violations else CheckStatus.PASS,
        max_violation=max(float(excess[k]), 0.0),
        witness={
            "x": x[k],
            "x_prime": x2[k],
            "y": y[k],
            "y_prime": y2[k],
            "z1": z1[k],
            "z2": z2[k],
        },
        constants={"samples": samples, "violations": violations, "seed": seed},
        runtime_ms=_elapsed(start),
    )


def coupled_walk(dim: int = 1, rule: CouplingRule = synchronous_rule) -> CouplingSpec:
    """
    Nearest-neighbour random walk coupled by ``rule``.
    """

    measure = walk_measure(dim)
    op = SumOp(terms=(JumpOp(mu=lambda x: measure),))
    return couple(op, rule)
