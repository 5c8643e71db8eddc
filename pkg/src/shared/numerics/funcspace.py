"""
Points, distances, scalar fields with derivative evaluators, and seeded sample clouds.

Every "for all x" statement elsewhere in the package is checked on a SampleCloud, and
every function the checks touch is a ScalarField. Fields carry analytic gradients and
Hessians where available; central finite differences are kept as an oracle.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy.spatial import cKDTree

from shared.numerics.errors import (
    DimensionMismatchError,
    FieldBoundError,
    MissingDerivativeError,
    NonFiniteValueError,
    NumericsError,
)
from shared.schemas.reports import CheckReport, CheckStatus

logger = logging.getLogger(__name__)

Point = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]

HESSIAN_SYMMETRY_TOL = 1e-12


class Smoothness(IntEnum):
    C0 = 0
    C1 = 1
    C2 = 2
    CINF = 3


def as_point(coords: Any, dim: int | None = None) -> Point:
    """
    Coerce coordinates to a finite 1-D float64 array, optionally checking the dimension.
    """

    point = np.atleast_1d(np.asarray(coords, dtype=np.float64))
    if point.ndim != 1 or point.size == 0:
        raise DimensionMismatchError(f"point must be a nonempty vector, got shape {point.shape}")
    if not np.all(np.isfinite(point)):
        raise NonFiniteValueError(f"point has non-finite coordinates: {point.tolist()}")
    if dim is not None and point.size != dim:
        raise DimensionMismatchError(f"expected dimension {dim}, got {point.size}")
    return point


def _same_dim(*points: Point) -> None:
    sizes = {p.size for p in points}
    if len(sizes) != 1:
        raise DimensionMismatchError(f"dimension mismatch: {sorted(sizes)}")


def distance_sq(a: Any, b: Any) -> float:
    a, b = as_point(a), as_point(b)
    _same_dim(a, b)
    diff = a - b
    return float(diff @ diff)


def shifted_distance_sq(a: Any, b: Any, z1: Any, z2: Any) -> float:
    """
    |(a − z1) − (b − z2)|², the squared distance after the shifts s_z1 and s_z2.
    """

    a, b, z1, z2 = (as_point(v) for v in (a, b, z1, z2))
    _same_dim(a, b, z1, z2)
    diff = (a - z1) - (b - z2)
    return float(diff @ diff)


def default_fd_step(x: Point, base: float = 1e-5) -> float:
    return base * (1.0 + float(np.linalg.norm(x)))


@dataclass(frozen=True, kw_only=True)
class ScalarField:
    """
    Real-valued function on R^q with optional derivative evaluators.

    Subclasses implement ``_value`` and, when they can, ``_gradient``/``_hessian``.
    Public accessors validate dimension, finiteness and the declared bounds.
    """

    smoothness: Smoothness = Smoothness.C0
    bound_above: float | None = None
    bound_below: float | None = None
    dim: int | None = None
    label: str = "field"

    # evaluator hooks -------------------------------------------------------

    def _value(self, x: Point) -> float:
        raise NotImplementedError

    def _values(self, points: npt.NDArray[np.float64]) -> Vector:
        return np.array([self._value(p) for p in points], dtype=np.float64)

    def _gradient(self, x: Point) -> Vector:
        raise MissingDerivativeError(f"{self.label} has no gradient evaluator")

    def _hessian(self, x: Point) -> Matrix:
        raise MissingDerivativeError(f"{self.label} has no hessian evaluator")

    @property
    def has_gradient(self) -> bool:
        return False

    @property
    def has_hessian(self) -> bool:
        return False

    # validated accessors ---------------------------------------------------

    def _check_point(self, x: Any) -> Point:
        return as_point(x, self.dim)

    def _check_bounds(self, value: float, x: Point) -> None:
        if self.bound_above is not None and value > self.bound_above + 1e-12 * (
            1.0 + abs(self.bound_above)
        ):
            raise FieldBoundError(
                f"{self.label}({x.tolist()}) = {value} exceeds declared bound {self.bound_above}"
            )
        if self.bound_below is not None and value < self.bound_below - 1e-12 * (
            1.0 + abs(self.bound_below)
        ):
            raise FieldBoundError(
                f"{self.label}({x.tolist()}) = {value} below declared bound {self.bound_below}"
            )

    def value(self, x: Any) -> float:
        point = self._check_point(x)
        result = float(self._value(point))
        if not math.isfinite(result):
            raise NonFiniteValueError(f"{self.label}({point.tolist()}) is not finite")
        self._check_bounds(result, point)
        return result

    __call__ = value

    def values(self, points: Any) -> Vector:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1) if (self.dim or 1) == 1 else pts.reshape(1, -1)
        if self.dim is not None and pts.shape[1] != self.dim:
            raise DimensionMismatchError(f"expected dimension {self.dim}, got {pts.shape[1]}")
        out = np.asarray(self._values(pts), dtype=np.float64)
        if not np.all(np.isfinite(out)):
            bad = int(np.flatnonzero(~np.isfinite(out))[0])
            raise NonFiniteValueError(f"{self.label}({pts[bad].tolist()}) is not finite")
        if self.bound_above is not None or self.bound_below is not None:
            for i in (int(np.argmax(out)), int(np.argmin(out))):
                self._check_bounds(float(out[i]), pts[i])
        return out

    def gradient(self, x: Any) -> Vector:
        point = self._check_point(x)
        grad = np.asarray(self._gradient(point), dtype=np.float64).reshape(point.size)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteValueError(f"gradient of {self.label} at {point.tolist()} not finite")
        return grad

    def hessian(self, x: Any) -> Matrix:
        point = self._check_point(x)
        hess = np.asarray(self._hessian(point), dtype=np.float64).reshape(point.size, point.size)
        if not np.all(np.isfinite(hess)):
            raise NonFiniteValueError(f"hessian of {self.label} at {point.tolist()} not finite")
        asym = float(np.max(np.abs(hess - hess.T))) if hess.size else 0.0
        if asym > HESSIAN_SYMMETRY_TOL * (1.0 + float(np.max(np.abs(hess)))):
            raise NumericsError(f"hessian of {self.label} not symmetric (defect {asym:.3e})")
        return hess

    # algebra ---------------------------------------------------------------

    def __add__(self, other: ScalarField | float) -> ScalarField:
        if isinstance(other, (int, float)):
            return LinearCombination(terms=((1.0, self),), constant=float(other), dim=self.dim)
        return LinearCombination(terms=((1.0, self), (1.0, other)), dim=self.dim or other.dim)

    __radd__ = __add__

    def __sub__(self, other: ScalarField | float) -> ScalarField:
        if isinstance(other, (int, float)):
            return self + (-float(other))
        return LinearCombination(terms=((1.0, self), (-1.0, other)), dim=self.dim or other.dim)

    def __neg__(self) -> ScalarField:
        return self.scale(-1.0)

    def scale(self, factor: float) -> ScalarField:
        factor = float(factor)
        above, below = self.bound_above, self.bound_below
        if factor < 0:
            above, below = below, above
        return LinearCombination(
            terms=((factor, self),),
            dim=self.dim,
            bound_above=None if above is None else factor * above,
            bound_below=None if below is None else factor * below,
        )

    def shifted(self, z: Any) -> ShiftedField:
        return ShiftedField(base=self, shift=as_point(z, self.dim))


@dataclass(frozen=True, kw_only=True)
class FunctionField(ScalarField):
    value_fn: Callable[[Point], float]
    gradient_fn: Callable[[Point], Vector] | None = None
    hessian_fn: Callable[[Point], Matrix] | None = None
    values_fn: Callable[[npt.NDArray[np.float64]], Vector] | None = None

    def _value(self, x: Point) -> float:
        return float(self.value_fn(x))

    def _values(self, points: npt.NDArray[np.float64]) -> Vector:
        if self.values_fn is not None:
            return np.asarray(self.values_fn(points), dtype=np.float64).reshape(len(points))
        return super()._values(points)

    def _gradient(self, x: Point) -> Vector:
        if self.gradient_fn is None:
            return super()._gradient(x)
        return self.gradient_fn(x)

    def _hessian(self, x: Point) -> Matrix:
        if self.hessian_fn is None:
            return super()._hessian(x)
        return self.hessian_fn(x)

    @property
    def has_gradient(self) -> bool:
        return self.gradient_fn is not None

    @property
    def has_hessian(self) -> bool:
        return self.hessian_fn is not None


@dataclass(frozen=True, kw_only=True)
class ShiftedField(ScalarField):
    """
    base ∘ s_z, i.e. x ↦ base(x − z).
    """

    base: ScalarField
    shift: Point

    def __post_init__(self) -> None:
        object.__setattr__(self, "dim", self.base.dim or self.shift.size)
        object.__setattr__(self, "smoothness", self.base.smoothness)
        object.__setattr__(self, "bound_above", self.base.bound_above)
        object.__setattr__(self, "bound_below", self.base.bound_below)
        object.__setattr__(self, "label", f"{self.base.label}∘s")

    def _value(self, x: Point) -> float:
        return self.base._value(x - self.shift)

    def _values(self, points: npt.NDArray[np.float64]) -> Vector:
        return self.base._values(points - self.shift)

    def _gradient(self, x: Point) -> Vector:
        return self.base._gradient(x - self.shift)

    def _hessian(self, x: Point) -> Matrix:
        return self.base._hessian(x - self.shift)

    @property
    def has_gradient(self) -> bool:
        return self.base.has_gradient

    @property
    def has_hessian(self) -> bool:
        return self.base.has_hessian


@dataclass(frozen=True, kw_only=True)
class LinearCombination(ScalarField):
    terms: tuple[tuple[float, ScalarField], ...]
    constant: float = 0.0

    def __post_init__(self) -> None:
        smooth = min((f.smoothness for _, f in self.terms), default=Smoothness.CINF)
        object.__setattr__(self, "smoothness", smooth)
        if self.label == "field":
            object.__setattr__(self, "label", "+".join(f.label for _, f in self.terms) or "const")

    def _value(self, x: Point) -> float:
        return self.constant + sum(c * f._value(x) for c, f in self.terms)

    def _values(self, points: npt.NDArray[np.float64]) -> Vector:
        out = np.full(len(points), self.constant, dtype=np.float64)
        for c, f in self.terms:
            out += c * f._values(points)
        return out

    def _gradient(self, x: Point) -> Vector:
        grad = np.zeros(x.size)
        for c, f in self.terms:
            grad += c * np.asarray(f._gradient(x), dtype=np.float64)
        return grad

    def _hessian(self, x: Point) -> Matrix:
        hess = np.zeros((x.size, x.size))
        for c, f in self.terms:
            hess += c * np.asarray(f._hessian(x), dtype=np.float64)
        return hess

    @property
    def has_gradient(self) -> bool:
        return all(f.has_gradient for _, f in self.terms)

    @property
    def has_hessian(self) -> bool:
        return all(f.has_hessian for _, f in self.terms)


@dataclass(frozen=True, kw_only=True)
class DirectSum(ScalarField):
    """
    (f1 ⊕ f2)(x, x′) = f1(x) + f2(x′) on R^{2q}.
    """

    first: ScalarField
    second: ScalarField
    half: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "dim", 2 * self.half)
        object.__setattr__(self, "smoothness", min(self.first.smoothness, self.second.smoothness))
        object.__setattr__(self, "label", f"{self.first.label}⊕{self.second.label}")

    def _value(self, w: Point) -> float:
        return self.first._value(w[: self.half]) + self.second._value(w[self.half :])

    def _values(self, points: npt.NDArray[np.float64]) -> Vector:
        return self.first._values(points[:, : self.half]) + self.second._values(
            points[:, self.half :]
        )

    def _gradient(self, w: Point) -> Vector:
        return np.concatenate(
            [self.first._gradient(w[: self.half]), self.second._gradient(w[self.half :])]
        )

    def _hessian(self, w: Point) -> Matrix:
        q = self.half
        hess = np.zeros((2 * q, 2 * q))
        hess[:q, :q] = self.first._hessian(w[:q])
        hess[q:, q:] = self.second._hessian(w[q:])
        return hess

    @property
    def has_gradient(self) -> bool:
        return self.first.has_gradient and self.second.has_gradient

    @property
    def has_hessian(self) -> bool:
        return self.first.has_hessian and self.second.has_hessian


def direct_sum(f1: ScalarField, f2: ScalarField, dim: int) -> DirectSum:
    return DirectSum(first=f1, second=f2, half=dim)


def constant_field(c: float, dim: int | None = None) -> FunctionField:
    c = float(c)
    return FunctionField(
        value_fn=lambda x: c,
        values_fn=lambda pts: np.full(len(pts), c),
        gradient_fn=lambda x: np.zeros(x.size),
        hessian_fn=lambda x: np.zeros((x.size, x.size)),
        smoothness=Smoothness.CINF,
        bound_above=c,
        bound_below=c,
        dim=dim,
        label=f"const({c:g})",
    )


def quadratic_field(center: Any, scale: float = 1.0, dim: int | None = None) -> FunctionField:
    """
    x ↦ (scale/2)|x − center|².
    """

    c = as_point(center, dim)
    a = float(scale)
    return FunctionField(
        value_fn=lambda x: 0.5 * a * float((x - c) @ (x - c)),
        values_fn=lambda pts: 0.5 * a * np.sum((pts - c) ** 2, axis=1),
        gradient_fn=lambda x: a * (x - c),
        hessian_fn=lambda x: a * np.eye(x.size),
        smoothness=Smoothness.CINF,
        dim=c.size,
        label="quadratic",
    )


def linear_field(p: Any, center: Any | None = None) -> FunctionField:
    """
    x ↦ ⟨p, x − center⟩.
    """

    pv = as_point(p)
    c = np.zeros_like(pv) if center is None else as_point(center, pv.size)
    return FunctionField(
        value_fn=lambda x: float(pv @ (x - c)),
        values_fn=lambda pts: (pts - c) @ pv,
        gradient_fn=lambda x: pv.copy(),
        hessian_fn=lambda x: np.zeros((x.size, x.size)),
        smoothness=Smoothness.CINF,
        dim=pv.size,
        label="linear",
    )


def fd_gradient(f: ScalarField, x: Any, h: float | None = None) -> Vector:
    """
    Central-difference gradient on the 2q stencil x ± h·e_i.
    """

    point = as_point(x)
    step = default_fd_step(point) if h is None else float(h)
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    grad = np.empty(point.size)
    for i in range(point.size):
        e = np.zeros(point.size)
        e[i] = step
        grad[i] = (f.value(point + e) - f.value(point - e)) / (2.0 * step)
    return grad


def fd_hessian(f: ScalarField, x: Any, h: float | None = None) -> Matrix:
    """
    Central-difference Hessian from values only (symmetrized).
    """

    point = as_point(x)
    q = point.size
    step = (1e-4 * (1.0 + float(np.linalg.norm(point)))) if h is None else float(h)
    f0 = f.value(point)
    hess = np.empty((q, q))
    for i in range(q):
        ei = np.zeros(q)
        ei[i] = step
        hess[i, i] = (f.value(point + ei) - 2.0 * f0 + f.value(point - ei)) / step**2
        for j in range(i + 1, q):
            ej = np.zeros(q)
            ej[j] = step
            mixed = (
                f.value(point + ei + ej)
                - f.value(point + ei - ej)
                - f.value(point - ei + ej)
                + f.value(point - ei - ej)
            ) / (4.0 * step**2)
            hess[i, j] = hess[j, i] = mixed
    return hess


@dataclass(frozen=True)
class CloudDescriptor:
    kind: str
    params: tuple[tuple[str, Any], ...] = ()

    def as_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **dict(self.params)}


@dataclass(frozen=True)
class SampleCloud:
    """
    A finite, nonempty, seeded set of points sharing one dimension.
    """

    points: npt.NDArray[np.float64]
    seed: int = 0
    descriptor: CloudDescriptor = field(default_factory=lambda: CloudDescriptor("explicit"))

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DimensionMismatchError("a sample cloud needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise NonFiniteValueError("sample cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def __iter__(self):
        return iter(self.points)

    @classmethod
    def grid(
        cls, lo: float | Sequence[float], hi: float | Sequence[float], n: int, dim: int = 1
    ) -> SampleCloud:
        """
        Tensor grid with n nodes per axis on [lo, hi]^dim.
        """

        if n < 1:
            raise ValueError("grid needs n >= 1")
        lo_v = np.broadcast_to(np.asarray(lo, dtype=np.float64), (dim,))
        hi_v = np.broadcast_to(np.asarray(hi, dtype=np.float64), (dim,))
        axes = [np.linspace(lo_v[i], hi_v[i], n) for i in range(dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        descriptor = CloudDescriptor(
            "grid", (("lo", lo_v.tolist()), ("hi", hi_v.tolist()), ("n", int(n)), ("dim", dim))
        )
        return cls(points=pts, seed=0, descriptor=descriptor)

    @classmethod
    def ball(
        cls, radius: float, count: int, dim: int, seed: int, center: Sequence[float] | None = None
    ) -> SampleCloud:
        """
        Uniform sample of the closed ball B_radius(center), reproducible from the seed.
        """

        rng = np.random.default_rng(seed)
        directions = rng.standard_normal((count, dim))
        norms = np.linalg.norm(directions, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        radii = float(radius) * rng.random((count, 1)) ** (1.0 / dim)
        c = np.zeros(dim) if center is None else as_point(center, dim)
        pts = c + directions / norms * radii
        descriptor = CloudDescriptor(
            "ball",
            (
                ("radius", float(radius)),
                ("count", int(count)),
                ("dim", dim),
                ("center", c.tolist()),
            ),
        )
        return cls(points=pts, seed=int(seed), descriptor=descriptor)

    @classmethod
    def explicit(cls, points: Any) -> SampleCloud:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        descriptor = CloudDescriptor("explicit", (("count", len(pts)),))
        return cls(points=pts, seed=0, descriptor=descriptor)

    def regenerate(self) -> SampleCloud:
        spec = self.descriptor.as_dict()
        if spec["kind"] == "grid":
            return SampleCloud.grid(spec["lo"], spec["hi"], spec["n"], spec["dim"])
        if spec["kind"] == "ball":
            return SampleCloud.ball(
                spec["radius"], spec["count"], spec["dim"], self.seed, spec["center"]
            )
        return SampleCloud.explicit(self.points)

    @property
    def is_grid(self) -> bool:
        return self.descriptor.kind == "grid"

    @property
    def mesh(self) -> float:
        """
        Grid spacing for grids, otherwise the largest nearest-neighbour distance.
        """

        if self.is_grid:
            spec = self.descriptor.as_dict()
            if spec["n"] < 2:
                return 0.0
            return float(max(np.subtract(spec["hi"], spec["lo"])) / (spec["n"] - 1))
        if len(self) < 2:
            return 0.0
        dist, _ = cKDTree(self.points).query(self.points, k=2)
        return float(np.max(dist[:, 1]))

    def on_boundary(self, point: Any) -> bool:
        if not self.is_grid:
            return False
        spec = self.descriptor.as_dict()
        p = as_point(point, self.dim)
        tol = 1e-12 * (1.0 + float(np.max(np.abs(p))))
        return bool(
            np.any(np.abs(p - np.asarray(spec["lo"])) <= tol)
            or np.any(np.abs(p - np.asarray(spec["hi"])) <= tol)
        )

    def enlarged(self, factor: float = 2.0) -> SampleCloud:
        """
        Same-mesh grid over a domain scaled by ``factor`` about its center.
        """

        if not self.is_grid:
            return self.scaled(factor)
        spec = self.descriptor.as_dict()
        lo, hi = np.asarray(spec["lo"]), np.asarray(spec["hi"])
        center, half = (lo + hi) / 2.0, (hi - lo) / 2.0
        steps = (spec["n"] - 1) * factor
        n = int(round(steps)) + 1
        return SampleCloud.grid(center - factor * half, center + factor * half, n, spec["dim"])

    def scaled(self, factor: float) -> SampleCloud:
        spec = self.descriptor.as_dict()
        if spec["kind"] == "grid":
            return SampleCloud.grid(
                np.asarray(spec["lo"]) * factor,
                np.asarray(spec["hi"]) * factor,
                spec["n"],
                spec["dim"],
            )
        if spec["kind"] == "ball":
            return SampleCloud.ball(
                spec["radius"] * factor,
                spec["count"],
                spec["dim"],
                self.seed,
                np.asarray(spec["center"]) * factor,
            )
        return SampleCloud.explicit(self.points * factor)

    def nearest(self, point: Any) -> Point:
        p = as_point(point, self.dim)
        _, idx = cKDTree(self.points).query(p)
        return np.array(self.points[int(idx)])

    def pairs(self, other: SampleCloud | None = None) -> SampleCloud:
        """
        All ordered pairs (x, x′) as a cloud on R^{2q}.
        """

        second = self if other is None else other
        if second.dim != self.dim:
            raise DimensionMismatchError("pair clouds need equal dimensions")
        n, m = len(self), len(second)
        first_rep = np.repeat(self.points, m, axis=0)
        second_rep = np.tile(second.points, (n, 1))
        descriptor = CloudDescriptor(
            "pairs", (("first", self.descriptor.as_dict()), ("second", second.descriptor.as_dict()))
        )
        return SampleCloud(
            points=np.hstack([first_rep, second_rep]), seed=self.seed, descriptor=descriptor
        )

    def as_dict(self) -> dict[str, Any]:
        return {"seed": self.seed, "size": len(self), **self.descriptor.as_dict()}


def check_gradient_consistency(
    f: ScalarField, cloud: SampleCloud, h: float = 1e-5, tolerance_scale: float = 1.0
) -> CheckReport:
    """
    Compare the declared gradient of ``f`` with central differences on the cloud.

    Pass iff |fd − gradient| ≤ 10·h·(1+|gradient|) at every point.
    """

    start = time.perf_counter()
    if not f.has_gradient:
        return CheckReport(
            name="gradient_consistency",
            status=CheckStatus.SKIP,
            message=f"{f.label} declares no gradient",
        )
    worst, witness = 0.0, {}
    for x in cloud.points:
        analytic = f.gradient(x)
        numeric = fd_gradient(f, x, h)
        bound = 10.0 * h * (1.0 + float(np.linalg.norm(analytic))) * tolerance_scale
        excess = float(np.max(np.abs(numeric - analytic))) - bound
        if excess > worst or not witness:
            worst = max(worst, excess)
            witness = {"x": x, "gradient": analytic, "fd_gradient": numeric, "bound": bound}
    status = CheckStatus.PASS if worst <= 0.0 else CheckStatus.FAIL
    logger.debug("gradient consistency field=%s worst_excess=%s", f.label, worst)
    return CheckReport(
        name="gradient_consistency",
        status=status,
        max_violation=max(worst, 0.0),
        witness=witness,
        constants={"h": h, "cloud": cloud.as_dict()},
        runtime_ms=(time.perf_counter() - start) * 1000.0,
    )
