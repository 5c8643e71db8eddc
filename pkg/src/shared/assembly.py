"""
Build numeric objects from a validated problem document.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np

from shared.config import Settings, get_settings
from shared.numerics.couplings import (
    CouplingRule,
    CouplingSpec,
    couple,
    idle_rule,
    independent_rule,
    map_rule,
    synchronous_rule,
    table_rule,
)
from shared.numerics.discretize import Boundary, Grid, LegendreControls, discretize
from shared.numerics.doubling import DoublingProblem
from shared.numerics.expressions import Expression, coordinate_env, parse_all
from shared.numerics.funcspace import FunctionField, SampleCloud, Smoothness
from shared.numerics.operators import (
    CostFunctional,
    CutProfile,
    DiffusionOp,
    DiscreteMeasure,
    DriftConvexOp,
    Hamiltonian,
    IsaacsOp,
    JumpOp,
    SumOp,
    map_measure,
    returning_walk_measure,
    walk_measure,
)
from shared.numerics.penalty import Containment, PenaltyFamily
from shared.numerics.resolvent import FiniteProblem, solve
from shared.schemas.document import (
    BallCloud,
    CloudSource,
    ContainmentSection,
    CouplingSection,
    DiffusionNode,
    DriftNode,
    FieldSource,
    GridCloud,
    IsaacsNode,
    JumpNode,
    OperatorNode,
    ProblemDocument,
    ResolventSection,
    SumNode,
)

logger = logging.getLogger(__name__)

DEFAULT_CHECK_CLOUD = {"kind": "ball", "radius": 3.0, "count": 128}


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


def _vector_fn(exprs: tuple[Expression, ...]):
    return lambda x: np.array([e.at_point(x) for e in exprs], dtype=np.float64)


def build_field(source: FieldSource, dim: int, label: str = "field") -> FunctionField:
    value = Expression.parse(source.value)
    gradient = parse_all(source.gradient) if source.gradient is not None else None
    hessian = (
        tuple(parse_all(row) for row in source.hessian) if source.hessian is not None else None
    )
    if source.smoothness is not None:
        smoothness = Smoothness[source.smoothness]
    elif hessian is not None:
        smoothness = Smoothness.C2
    elif gradient is not None:
        smoothness = Smoothness.C1
    else:
        smoothness = Smoothness.C0

    hessian_fn = None
    if hessian is not None:
        rows = hessian

        def hessian_fn(x):
            return np.array([[e.at_point(x) for e in row] for row in rows], dtype=np.float64)

    return FunctionField(
        value_fn=value.at_point,
        values_fn=value.at_points,
        gradient_fn=_vector_fn(gradient) if gradient is not None else None,
        hessian_fn=hessian_fn,
        smoothness=smoothness,
        dim=dim,
        label=source.label or label,
    )


def build_cloud(source: CloudSource | dict[str, Any], dim: int, seed: int = 0) -> SampleCloud:
    """
    Materialize a cloud descriptor in dimension ``dim``. Ball seeds come from the document.
    """

    if isinstance(source, dict):
        source = BallCloud.model_validate({"seed": seed, **source})
    if isinstance(source, GridCloud):
        return SampleCloud.grid(source.lo, source.hi, source.n, dim)
    if isinstance(source, BallCloud):
        center = source.center
        if center is not None and len(center) != dim:
            raise ValueError(f"ball cloud center has dimension {len(center)}, expected {dim}")
        return SampleCloud.ball(source.radius, source.count, dim, source.seed, center)
    cloud = SampleCloud.explicit(source.points)
    if cloud.dim != dim:
        raise ValueError(f"explicit cloud has dimension {cloud.dim}, expected {dim}")
    return cloud


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def _drift(node: DriftNode, dim: int) -> DriftConvexOp:
    if len(node.b) != dim:
        raise ValueError(f"drift has {len(node.b)} components for dimension {dim}")
    b = parse_all(node.b)

    def b_values(points: np.ndarray) -> np.ndarray:
        return np.stack([e.at_points(points) for e in b], axis=1)

    hconv = None
    if node.hconv is not None:
        h = Expression.parse(node.hconv)

        def hconv(p):
            return float(h.evaluate(coordinate_env(p, "p")))

    return DriftConvexOp(
        b=_vector_fn(b),
        hconv=hconv,
        lipschitz=node.lipschitz,
        growth=node.growth,
        label=node.label,
        b_values=b_values,
    )


def _diffusion(node: DiffusionNode, dim: int) -> DiffusionOp:
    if len(node.sigma) != dim:
        raise ValueError(f"Σ has {len(node.sigma)} rows for dimension {dim}")
    rows = tuple(parse_all(row) for row in node.sigma)

    def sigma(x):
        return np.array([[e.at_point(x) for e in row] for row in rows], dtype=np.float64)

    return DiffusionOp(sigma=sigma, label=node.label)


def _jump(node: JumpNode, dim: int) -> JumpOp:
    cut = CutProfile(r0=node.cut_r0)
    if node.measure == "walk":
        fixed = walk_measure(dim, node.weight)
        return JumpOp(mu=lambda x: fixed, cut=cut, label=node.label)
    if node.measure == "returning_walk":
        if dim != 1:
            raise ValueError("the returning walk is one-dimensional")
        return JumpOp(mu=returning_walk_measure, cut=cut, label=node.label)
    if node.measure == "map":
        assert node.eta is not None
        return JumpOp(mu=map_measure(_vector_fn(parse_all(node.eta))), cut=cut, label=node.label)

    atoms = [(parse_all(a.z), Expression.parse(a.w)) for a in node.atoms]
    if any(len(z) != dim for z, _ in atoms):
        raise ValueError(f"jump atoms must have dimension {dim}")

    def mu(x):
        pairs = [([e.at_point(x) for e in z], w.at_point(x)) for z, w in atoms]
        return DiscreteMeasure.from_pairs(pairs, dim)

    return JumpOp(mu=mu, cut=cut, label=node.label)


def _isaacs(node: IsaacsNode, dim: int) -> IsaacsOp:
    components = {
        (i, j): build_operator(comp, dim)
        for i, row in enumerate(node.components)
        for j, comp in enumerate(row)
    }
    theta1, theta2 = tuple(node.theta1), tuple(node.theta2)
    if node.cost is None:
        cost = CostFunctional.zero(theta1, theta2)
    else:
        table = [[None if t is None else Expression.parse(t) for t in row] for row in node.cost]

        def at(x):
            return np.array(
                [[math.inf if e is None else e.at_point(x) for e in row] for row in table]
            )

        cost = CostFunctional(table=at, theta1=theta1, theta2=theta2)
    return IsaacsOp(components=components, cost=cost, label=node.label)


def build_operator(node: OperatorNode, dim: int) -> Hamiltonian:
    if isinstance(node, DriftNode):
        return _drift(node, dim)
    if isinstance(node, DiffusionNode):
        return _diffusion(node, dim)
    if isinstance(node, JumpNode):
        return _jump(node, dim)
    if isinstance(node, SumNode):
        return SumOp(terms=tuple(build_operator(t, dim) for t in node.terms), label=node.label)
    return _isaacs(node, dim)


def build_rule(section: CouplingSection, dim: int) -> CouplingRule:
    if section.rule == "independent":
        return independent_rule
    if section.rule == "idle":
        return idle_rule
    if section.rule == "map":
        assert section.eta is not None
        return map_rule(_vector_fn(parse_all(section.eta)))
    if section.rule == "table":
        rows = [(r.z1, r.z2, r.w) for r in section.rows]
        return table_rule(lambda x, x2: rows)
    return synchronous_rule


def build_containment(section: ContainmentSection, dim: int) -> Containment:
    if section.kind == "log":
        return Containment.default(dim)
    assert section.field is not None
    return Containment(
        V=build_field(section.field, dim, label="V"),
        kappa_v=section.kappa_v,
        argmin=tuple(section.argmin) if section.argmin is not None else None,
    )


# ---------------------------------------------------------------------------
# resolvent
# ---------------------------------------------------------------------------


def _h_vector(source: list[float] | FieldSource, states: np.ndarray, dim: int) -> np.ndarray:
    if isinstance(source, list):
        return np.asarray(source, dtype=np.float64)
    return build_field(source, dim, label="h").values(states)


def build_finite_problem(
    section: ResolventSection, op: Hamiltonian | None, dim: int
) -> tuple[FiniteProblem, Grid | None]:
    """
    The finite problem of a resolvent section, with h = h₁, plus its grid when discretized.
    """

    if section.discretize is not None:
        spec = section.discretize
        if op is None:
            raise ValueError("discretizing needs an operator")
        grid = Grid(radius=spec.radius, mesh=spec.mesh, dim=dim)
        controls = (
            LegendreControls(**spec.controls.model_dump()) if spec.controls is not None else None
        )
        h = _h_vector(section.h1, grid.points, dim)
        problem = discretize(op, grid, h, section.lam, Boundary(spec.boundary), controls)
        return problem, grid

    chain = section.explicit
    assert chain is not None
    states = np.asarray(chain.states, dtype=np.float64)
    n, n1, n2 = len(states), len(chain.theta1), len(chain.theta2)
    generators = {tuple(g.theta): np.asarray(g.rates, dtype=np.float64) for g in chain.generators}
    if chain.cost is None:
        cost = np.zeros((n, n1, n2))
    else:
        cost = np.array(
            [[[math.inf if c is None else c for c in row] for row in t] for t in chain.cost],
            dtype=np.float64,
        )
    problem = FiniteProblem(
        states=states,
        generators=generators,
        cost=cost,
        lam=section.lam,
        h=_h_vector(section.h1, states, dim),
        theta1=tuple(chain.theta1),
        theta2=tuple(chain.theta2),
    )
    return problem, None


def random_pairs(
    n: int, count: int, seed: int, scale: float = 1.0
) -> list[tuple[np.ndarray, np.ndarray]]:
    rng = np.random.default_rng(seed)
    return [
        (scale * rng.standard_normal(n), scale * rng.standard_normal(n)) for _ in range(count)
    ]


def localized_pairs(
    states: np.ndarray, count: int, seed: int, radius: float
) -> list[tuple[np.ndarray, np.ndarray]]:
    """
    Pairs with h₁ = h₂ outside the ball of ``radius`` about the origin.
    """

    rng = np.random.default_rng(seed)
    inside = np.linalg.norm(states, axis=1) <= radius
    out = []
    for _ in range(count):
        h2 = rng.standard_normal(len(states))
        h1 = h2 + np.where(inside, rng.uniform(-1.0, 1.0, len(states)), 0.0)
        out.append((h1, h2))
    return out


# ---------------------------------------------------------------------------
# whole document
# ---------------------------------------------------------------------------


@dataclass
class Assembly:
    """
    Lazily built numeric objects of one document.
    """

    doc: ProblemDocument
    settings: Settings
    seed: int
    tolerance_scale: float = 1.0

    @classmethod
    def from_document(
        cls,
        doc: ProblemDocument,
        seed: int | None = None,
        tolerance_scale: float | None = None,
        settings: Settings | None = None,
    ) -> Assembly:
        settings = settings or get_settings()
        return cls(
            doc=doc,
            settings=settings,
            seed=seed if seed is not None else doc.seed_or(settings.DEFAULT_SEED),
            tolerance_scale=(
                tolerance_scale if tolerance_scale is not None else settings.TOLERANCE_SCALE
            ),
        )

    @property
    def dim(self) -> int:
        return self.doc.dim

    @cached_property
    def op(self) -> Hamiltonian:
        return build_operator(self.doc.operator, self.dim)

    @cached_property
    def coupling(self) -> CouplingSpec | None:
        if isinstance(self.op, IsaacsOp):
            return None
        return couple(self.op, build_rule(self.doc.coupling, self.dim))

    @cached_property
    def family(self) -> PenaltyFamily:
        p = self.doc.penalty
        return PenaltyFamily(collection=p.collection, R=p.R, Rp=p.Rp, Rpp=p.Rpp)

    @cached_property
    def containment(self) -> Containment:
        return build_containment(self.doc.containment, self.dim)

    def cloud(self, source: CloudSource | None, factor: int = 1) -> SampleCloud:
        """
        A check cloud in dimension factor·q. Product-space ball clouds may give a center
        in R^q; it is repeated in every copy.
        """

        if isinstance(source, BallCloud) and source.center is not None and factor > 1:
            if len(source.center) == self.dim:
                source = source.model_copy(update={"center": list(source.center) * factor})
        return build_cloud(source or dict(DEFAULT_CHECK_CLOUD), factor * self.dim, self.seed)

    @cached_property
    def finite(self) -> tuple[FiniteProblem, Grid | None]:
        if self.doc.resolvent is None:
            raise ValueError("the document has no resolvent section")
        return build_finite_problem(self.doc.resolvent, self.op, self.dim)

    def h_vector(self, source: list[float] | FieldSource) -> np.ndarray:
        problem, _ = self.finite
        return _h_vector(source, problem.states, self.dim)

    def _solved(self, source: FieldSource, lam: float, label: str) -> FunctionField:
        problem, grid = self.finite
        assert grid is not None
        h = build_field(source, self.dim).values(grid.points)
        order = self.doc.resolvent.order if self.doc.resolvent is not None else "sup_inf"
        solution = solve(problem.with_lambda(lam).with_h(h), order)
        logger.info(
            "solved %s for doubling residual=%s method=%s",
            label,
            solution.residual,
            solution.method,
        )
        return grid.field(solution.f, label=label)

    @cached_property
    def doubling(self) -> DoublingProblem:
        section = self.doc.doubling
        if section is None:
            raise ValueError("the document has no doubling section")
        dim = self.dim
        u = (
            self._solved(section.h1, section.lam, "u")
            if section.u == "solve"
            else build_field(section.u, dim, label="u")
        )
        v = (
            self._solved(section.h2, section.lam, "v")
            if section.v == "solve"
            else build_field(section.v, dim, label="v")
        )
        return DoublingProblem(
            u=u,
            v=v,
            op=self.op,
            lam=section.lam,
            h1=build_field(section.h1, dim, label="h1"),
            h2=build_field(section.h2, dim, label="h2"),
            K=build_cloud(section.K, dim, self.seed),
            cloud=build_cloud(section.cloud, dim, self.seed),
            eps=section.eps,
            phi=section.phi,
            containment=self.containment,
            family=self.family,
            coupling=self.coupling,
            c_v=section.c_v,
            polish=section.polish,
            seed=section.seed if section.seed is not None else self.seed,
            tolerance_scale=self.tolerance_scale,
        )
