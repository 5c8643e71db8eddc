"""
Monotone finite-difference truncation of operator trees onto tensor grids.

Drift leaves are upwinded, diagonal diffusions use the centered three-point stencil and
jump atoms are spread over the surrounding grid nodes with multilinear weights, so every
generator has nonnegative off-diagonal rates and row sums ≤ 0.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from enum import StrEnum
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator

from shared.numerics.errors import DiscretizationError
from shared.numerics.funcspace import FunctionField, ScalarField, Smoothness
from shared.numerics.operators import (
    DiffusionOp,
    DriftConvexOp,
    Hamiltonian,
    IsaacsOp,
    JumpOp,
)
from shared.numerics.resolvent import FiniteProblem

logger = logging.getLogger(__name__)

OFF_DIAGONAL_TOLERANCE = 1e-14
MESH_TOLERANCE = 1e-9


class Boundary(StrEnum):
    CLAMP = "clamp"
    LEAK = "leak"


@dataclass(frozen=True)
class Grid:
    """
    The box [−radius, radius]^dim with nodes spaced ``mesh`` apart.
    """

    radius: float
    mesh: float
    dim: int = 1

    def __post_init__(self) -> None:
        if not (self.radius > 0 and self.mesh > 0 and self.dim >= 1):
            raise DiscretizationError("grid needs radius > 0, mesh > 0 and dim ≥ 1")
        cells = 2.0 * self.radius / self.mesh
        if abs(cells - round(cells)) > MESH_TOLERANCE * max(1.0, cells):
            raise DiscretizationError(
                f"2·radius = {2 * self.radius} is not a multiple of mesh {self.mesh}"
            )

    @property
    def nodes_per_axis(self) -> int:
        return int(round(2.0 * self.radius / self.mesh)) + 1

    @property
    def axis(self) -> np.ndarray:
        return -self.radius + self.mesh * np.arange(self.nodes_per_axis)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.nodes_per_axis**self.dim

    @property
    def points(self) -> npt.NDArray[np.float64]:
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def flat(self, multi: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(tuple(np.asarray(multi).T), self.shape)

    def spread(self, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Multilinear weights of ``targets`` (m, dim) over their 2^dim surrounding nodes.
        Targets must lie inside the box. Returns flat indices and weights, both (m, 2^dim).
        """

        n = self.nodes_per_axis
        pos = (targets + self.radius) / self.mesh
        base = np.clip(np.floor(pos).astype(int), 0, n - 2) if n > 1 else np.zeros_like(pos, int)
        frac = np.clip(pos - base, 0.0, 1.0)
        corners = list(itertools.product((0, 1), repeat=self.dim))
        idx = np.empty((len(targets), len(corners)), dtype=int)
        wts = np.empty((len(targets), len(corners)))
        for c, corner in enumerate(corners):
            offset = np.asarray(corner)
            multi = np.minimum(base + offset, n - 1)
            idx[:, c] = self.flat(multi)
            wts[:, c] = np.prod(np.where(offset == 1, frac, 1.0 - frac), axis=1)
        return idx, wts

    def inside(self, targets: np.ndarray) -> np.ndarray:
        slack = MESH_TOLERANCE * self.mesh
        return np.all(np.abs(targets) <= self.radius + slack, axis=1)

    def field(self, values: Any, label: str = "grid") -> FunctionField:
        """
        Piecewise-linear interpolant of nodal values; points outside the box are clamped.
        """

        table = np.asarray(values, dtype=np.float64).reshape(self.shape)
        axis = self.axis
        if self.dim == 1:

            def many(pts: np.ndarray) -> np.ndarray:
                return np.interp(pts[:, 0], axis, table)

        else:
            interp = RegularGridInterpolator((axis,) * self.dim, table)

            def many(pts: np.ndarray) -> np.ndarray:
                return interp(np.clip(pts, -self.radius, self.radius))

        return FunctionField(
            value_fn=lambda x: float(many(x.reshape(1, -1))[0]),
            values_fn=many,
            smoothness=Smoothness.C0,
            bound_above=float(np.max(table)),
            bound_below=float(np.min(table)),
            dim=self.dim,
            label=label,
        )

    def as_dict(self) -> dict[str, Any]:
        return {"radius": self.radius, "mesh": self.mesh, "dim": self.dim, "states": self.size}


@dataclass(frozen=True)
class LegendreControls:
    """
    Finite control grid for 𝓗(p) = max_a ⟨a, p⟩ − 𝓗*(a).
    """

    a_max: float = 2.0
    per_axis: int = 9
    p_max: float = 4.0
    momenta: int = 401

    def build(self, hconv: Any, dim: int) -> tuple[np.ndarray, np.ndarray]:
        """
        Control vectors (m, dim) and conjugate costs 𝓗*(a); a cost is +∞ when the sup over
        the momentum grid sits on its outer shell.
        """

        a_axis = np.linspace(-self.a_max, self.a_max, self.per_axis)
        p_axis = np.linspace(-self.p_max, self.p_max, self.momenta)
        A = np.stack([m.ravel() for m in np.meshgrid(*([a_axis] * dim), indexing="ij")], axis=1)
        P = np.stack([m.ravel() for m in np.meshgrid(*([p_axis] * dim), indexing="ij")], axis=1)
        H = np.array([float(hconv(p)) for p in P])
        scores = A @ P.T - H
        best = np.argmax(scores, axis=1)
        costs = scores[np.arange(len(A)), best]
        on_shell = np.any(np.isclose(np.abs(P[best]), self.p_max), axis=1)
        costs[on_shell] = np.inf
        return A, costs


class _Assembler:
    """Accumulates COO triplets of one generator; every rate adds its own −rate diagonal."""

    def __init__(self, n: int) -> None:
        self.n = n
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []

    def add(self, src: np.ndarray, dst: np.ndarray, rate: np.ndarray) -> None:
        if np.any(rate < -OFF_DIAGONAL_TOLERANCE):
            raise DiscretizationError("negative transition rate")
        self.rows += [src, src]
        self.cols += [dst, src]
        self.vals += [rate, -rate]

    def leak(self, src: np.ndarray, rate: np.ndarray) -> None:
        self.rows.append(src)
        self.cols.append(src)
        self.vals.append(-rate)

    def matrix(self) -> sparse.csr_matrix:
        if not self.rows:
            return sparse.csr_matrix((self.n, self.n))
        return sparse.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(self.n, self.n),
        ).tocsr()


def _neighbors(grid: Grid, axis: int, step: int) -> tuple[np.ndarray, np.ndarray]:
    multi = np.stack(np.unravel_index(np.arange(grid.size), grid.shape), axis=1)
    moved = multi.copy()
    moved[:, axis] += step
    ok = (moved[:, axis] >= 0) & (moved[:, axis] < grid.nodes_per_axis)
    dst = np.full(grid.size, -1)
    dst[ok] = grid.flat(moved[ok])
    return dst, ok


def _move(
    asm: _Assembler, grid: Grid, axis: int, step: int, rate: np.ndarray, b: Boundary
) -> None:
    dst, ok = _neighbors(grid, axis, step)
    src = np.arange(grid.size)
    live = rate > 0
    asm.add(src[ok & live], dst[ok & live], rate[ok & live])
    if b is Boundary.LEAK:
        asm.leak(src[~ok & live], rate[~ok & live])


def _leaves(tree: Hamiltonian) -> tuple[list[DriftConvexOp], list[DiffusionOp], list[JumpOp]]:
    drifts, diffusions, jumps = [], [], []
    for leaf in tree.leaves():
        if isinstance(leaf, DriftConvexOp):
            drifts.append(leaf)
        elif isinstance(leaf, DiffusionOp):
            diffusions.append(leaf)
        elif isinstance(leaf, JumpOp):
            jumps.append(leaf)
        else:
            raise DiscretizationError(f"no stencil for leaf {type(leaf).__name__}")
    return drifts, diffusions, jumps


def _generator(
    tree: Hamiltonian, grid: Grid, boundary: Boundary, control: np.ndarray | None = None
) -> sparse.csr_matrix:
    points = grid.points
    n, h = grid.size, grid.mesh
    drifts, diffusions, jumps = _leaves(tree)
    asm = _Assembler(n)

    drift = np.zeros_like(points)
    for leaf in drifts:
        drift += leaf.drift_at(points)
    if control is not None:
        drift += control

    for leaf in jumps:
        src, dst_pts, rates = [], [], []
        for k, x in enumerate(points):
            m = leaf.measure(x)
            if len(m) == 0:
                continue
            drift[k] -= (m.weights * leaf.cut.chi(m.atoms)) @ m.atoms
            src.append(np.full(len(m), k))
            dst_pts.append(x + m.atoms)
            rates.append(m.weights)
        if not src:
            continue
        s, targets, r = np.concatenate(src), np.concatenate(dst_pts), np.concatenate(rates)
        inside = grid.inside(targets)
        if boundary is Boundary.CLAMP:
            targets = np.clip(targets, -grid.radius, grid.radius)
            inside[:] = True
        else:
            asm.leak(s[~inside], r[~inside])
        idx, wts = grid.spread(targets[inside])
        for c in range(idx.shape[1]):
            asm.add(s[inside], idx[:, c], r[inside] * wts[:, c])

    for axis in range(grid.dim):
        speed = drift[:, axis] / h
        _move(asm, grid, axis, +1, np.maximum(speed, 0.0), boundary)
        _move(asm, grid, axis, -1, np.maximum(-speed, 0.0), boundary)

    if diffusions:
        diag = np.zeros_like(points)
        for leaf in diffusions:
            for k, x in enumerate(points):
                a = leaf.covariance(x)
                off = a - np.diag(np.diag(a))
                if np.max(np.abs(off), initial=0.0) > OFF_DIAGONAL_TOLERANCE:
                    raise DiscretizationError(
                        f"{leaf.label}: ΣΣᵀ has off-diagonal entries at {x.tolist()}"
                    )
                diag[k] += np.diag(a)
        for axis in range(grid.dim):
            rate = 0.5 * diag[:, axis] / (h * h)
            _move(asm, grid, axis, +1, rate, boundary)
            _move(asm, grid, axis, -1, rate, boundary)

    return asm.matrix()


def discretize(
    op: Hamiltonian,
    grid: Grid,
    h: ScalarField | Any,
    lam: float,
    boundary: Boundary | str = Boundary.CLAMP,
    controls: LegendreControls | None = None,
) -> FiniteProblem:
    """
    Truncate ℍ to the grid as a finite Bellman/Isaacs problem f − λH f = h.

    A drift leaf with a convex part 𝓗 becomes a sup over a finite Legendre control grid.
    Isaacs nodes keep their control grids and cost tables.
    """

    boundary = Boundary(boundary)
    points = grid.points
    h_vec = h.values(points) if isinstance(h, ScalarField) else np.asarray(h, dtype=np.float64)
    if h_vec.size != grid.size:
        raise DiscretizationError(f"h has {h_vec.size} entries for {grid.size} grid nodes")

    generators: dict[tuple[int, int], sparse.csr_matrix] = {}
    if isinstance(op, IsaacsOp):
        if any(d.hconv is not None for d in _leaves(op)[0]):
            raise DiscretizationError("convex parts inside Isaacs nodes are not discretized")
        for key, component in op.components.items():
            generators[key] = _generator(component, grid, boundary)
        cost = np.stack([op.cost.at(x) for x in points])
        theta1, theta2 = op.cost.theta1, op.cost.theta2
    else:
        convex = [d for d in _leaves(op)[0] if d.hconv is not None]
        if len(convex) > 1:
            raise DiscretizationError("at most one drift leaf may carry a convex part")
        if convex:
            A, conj = (controls or LegendreControls()).build(convex[0].hconv, grid.dim)
            for i, a in enumerate(A):
                generators[(i, 0)] = _generator(op, grid, boundary, control=a)
            cost = np.broadcast_to(conj.reshape(1, -1, 1), (grid.size, len(A), 1)).copy()
            theta1 = tuple(f"a={np.round(a, 6).tolist()}" for a in A)
        else:
            generators[(0, 0)] = _generator(op, grid, boundary)
            cost = np.zeros((grid.size, 1, 1))
            theta1 = ("-",)
        theta2 = ("-",)

    problem = FiniteProblem(
        states=points,
        generators=generators,
        cost=cost,
        lam=lam,
        h=h_vec,
        theta1=theta1,
        theta2=theta2,
        notes=(
            f"grid radius={grid.radius} mesh={grid.mesh} dim={grid.dim}",
            f"boundary={boundary.value}",
        ),
    )
    logger.info(
        "discretized states=%s controls=%s leaking_rows=%s",
        problem.n,
        problem.shape,
        problem.leaking_rows,
    )
    return problem
