import json

import numpy as np
import pytest

from shared.assembly import (
    Assembly,
    build_cloud,
    build_field,
    build_finite_problem,
    build_operator,
    localized_pairs,
    random_pairs,
)
from shared.config import Settings
from shared.numerics.funcspace import Smoothness, quadratic_field
from shared.numerics.operators import DriftConvexOp, IsaacsOp, JumpOp, SumOp
from shared.numerics.resolvent import solve
from shared.schemas.document import (
    BallCloud,
    FieldSource,
    GridCloud,
    ProblemDocument,
    ResolventSection,
)


def _load(problems_dir, name: str) -> ProblemDocument:
    data = json.loads((problems_dir / f"{name}.json").read_text(encoding="utf-8"))
    return ProblemDocument.model_validate(data)


def test_field_smoothness_follows_derivatives():
    full = build_field(
        FieldSource(value="x1*x1", gradient=["2*x1"], hessian=[["2"]]), dim=1, label="sq"
    )
    assert full.smoothness == Smoothness.C2
    assert full.label == "sq"
    assert full.value([3.0]) == pytest.approx(9.0)
    assert full.gradient([3.0]).tolist() == pytest.approx([6.0])
    assert full.hessian([3.0]).tolist() == [[2.0]]
    assert full.values(np.array([[1.0], [2.0]])).tolist() == pytest.approx([1.0, 4.0])

    bare = build_field(FieldSource.model_validate("x1 + x2"), dim=2)
    assert bare.smoothness == Smoothness.C0
    assert not bare.has_gradient
    assert bare.value([1.0, 2.0]) == pytest.approx(3.0)

    declared = build_field(FieldSource(value="x1", smoothness="CINF"), dim=1)
    assert declared.smoothness == Smoothness.CINF


def test_build_cloud():
    grid = build_cloud(GridCloud(kind="grid", lo=-1.0, hi=1.0, n=3), dim=2)
    assert len(grid) == 9
    assert grid.dim == 2
    ball = build_cloud({"kind": "ball", "radius": 2.0, "count": 50}, dim=3, seed=4)
    assert len(ball) == 50
    assert ball.seed == 4
    assert np.all(np.linalg.norm(ball.points, axis=1) <= 2.0 + 1e-12)
    same = build_cloud({"kind": "ball", "radius": 2.0, "count": 50}, dim=3, seed=4)
    assert np.array_equal(ball.points, same.points)


def test_explicit_cloud_dimension():
    source = {"kind": "explicit", "points": [[0.0, 1.0]]}
    doc = ProblemDocument.model_validate(
        {
            "name": "c",
            "operator": {"kind": "drift", "b": ["0"]},
            "checks": [{"name": "penalty", "cloud": source}],
        }
    )
    with pytest.raises(ValueError, match="dimension 2, expected 1"):
        build_cloud(doc.checks[0].cloud, dim=1)


def test_walk50_operator(problems_dir):
    doc = _load(problems_dir, "walk50")
    op = build_operator(doc.operator, doc.dim)
    assert isinstance(op, SumOp)
    assert [type(leaf) for leaf in op.leaves()] == [DriftConvexOp, JumpOp]
    f = quadratic_field([0.0])
    # −x·x from the drift plus 1 from the symmetric unit walk
    assert op.apply(f, np.array([1.0])) == pytest.approx(0.0)
    assert op.apply(f, np.array([2.0])) == pytest.approx(-3.0)


def test_isaacs_operator():
    still = {"kind": "drift", "b": ["0"]}
    doc = ProblemDocument.model_validate(
        {
            "name": "g",
            "operator": {
                "kind": "isaacs",
                "theta1": ["a", "b"],
                "theta2": ["c"],
                "components": [[still], [still]],
                "cost": [["x1"], [None]],
            },
        }
    )
    op = build_operator(doc.operator, doc.dim)
    assert isinstance(op, IsaacsOp)
    table = op.cost.table(np.array([2.0]))
    assert table[0, 0] == pytest.approx(2.0)
    assert np.isinf(table[1, 0])


def test_explicit_finite_problem():
    section = ResolventSection.model_validate(
        {
            "lam": 2.0,
            "explicit": {
                "states": [0.0, 1.0],
                "generators": [
                    {"theta": [0, 0], "rates": [[0.0, 0.0], [0.0, 0.0]]},
                    {"theta": [1, 0], "rates": [[-1.0, 1.0], [0.0, 0.0]]},
                ],
                "theta1": ["stay", "move"],
                "cost": [[[0.0], [None]], [[0.0], [0.5]]],
            },
            "h1": [0.0, 1.0],
        }
    )
    problem, grid = build_finite_problem(section, None, 1)
    assert grid is None
    assert problem.n == 2
    assert problem.lam == 2.0
    assert problem.theta1 == ("stay", "move")
    assert np.isinf(problem.cost[0, 1, 0])
    assert problem.cost[1, 1, 0] == 0.5


def test_discretized_finite_problem(problems_dir):
    doc = _load(problems_dir, "walk50")
    op = build_operator(doc.operator, doc.dim)
    problem, grid = build_finite_problem(doc.resolvent, op, doc.dim)
    assert grid.size == 50
    assert problem.n == 50
    assert problem.h == pytest.approx(np.tanh(grid.points[:, 0]))
    with pytest.raises(ValueError, match="needs an operator"):
        build_finite_problem(doc.resolvent, None, doc.dim)


def test_random_pairs_are_reproducible():
    a = random_pairs(6, 3, seed=2, scale=0.5)
    b = random_pairs(6, 3, seed=2, scale=0.5)
    assert len(a) == 3
    assert all(np.array_equal(x[0], y[0]) and np.array_equal(x[1], y[1]) for x, y in zip(a, b))


def test_localized_pairs_agree_far_away():
    states = np.linspace(-5.0, 5.0, 21)[:, None]
    outside = np.abs(states[:, 0]) > 2.0
    for h1, h2 in localized_pairs(states, 5, seed=3, radius=2.0):
        assert np.array_equal(h1[outside], h2[outside])
        assert np.all(np.abs(h1 - h2) <= 1.0)


def test_assembly_seed_and_scale(problems_dir):
    doc = _load(problems_dir, "symmetric")
    settings = Settings(DEFAULT_SEED=99, TOLERANCE_SCALE=3.0)
    a = Assembly.from_document(doc, settings=settings)
    assert a.seed == 1
    assert a.tolerance_scale == 3.0
    b = Assembly.from_document(doc, seed=5, tolerance_scale=0.5, settings=settings)
    assert (b.seed, b.tolerance_scale) == (5, 0.5)
    unseeded = Assembly.from_document(doc.model_copy(update={"seed": None}), settings=settings)
    assert unseeded.seed == 99


def test_assembly_builds_doubling(problems_dir):
    a = Assembly.from_document(_load(problems_dir, "symmetric"))
    prob = a.doubling
    assert prob.eps == 0.5
    assert prob.phi == 0.5
    assert len(prob.K) == 3
    assert len(prob.cloud) == 41
    assert prob.u.value([0.3]) == 0.0
    assert prob.seed == 1
    assert a.doubling is prob
    assert a.coupling is not None
    assert a.family.collection == 1
    with pytest.raises(ValueError, match="no resolvent section"):
        _ = a.finite


def test_assembly_solves_u_and_v(problems_dir):
    doc = _load(problems_dir, "drift_walk")
    a = Assembly.from_document(doc)
    prob = a.doubling
    problem, grid = a.finite
    assert problem.n == grid.size
    # the grid interpolant of the resolvent solution reproduces it on the nodes
    k = len(grid.points) // 2
    node = grid.points[k]
    h1 = 1.0 / (1.0 + grid.points[:, 0] ** 2)
    direct = solve(problem.with_lambda(0.5).with_h(h1)).f
    assert prob.u.value(node) == pytest.approx(direct[k])
    # v solves for the shifted, damped bump
    assert abs(prob.u.value(node) - prob.v.value(node)) > 1e-3


def test_ball_center_must_match_dimension(problems_dir):
    source = {"kind": "ball", "radius": 1.0, "count": 8, "seed": 1, "center": [0.5, 0.5]}
    with pytest.raises(ValueError, match="center has dimension 2, expected 1"):
        build_cloud(source, dim=1)
    a = Assembly.from_document(_load(problems_dir, "brownian"))
    centered = BallCloud(kind="ball", radius=0.1, count=16, seed=3, center=[2.0])
    product = a.cloud(centered, factor=2)
    assert product.dim == 2
    assert np.all(np.abs(product.points - 2.0) <= 0.1 + 1e-12)
    with pytest.raises(ValueError, match="center has dimension 3, expected 2"):
        a.cloud(centered.model_copy(update={"center": [0.0, 0.0, 0.0]}), factor=2)


def test_default_check_cloud(problems_dir):
    a = Assembly.from_document(_load(problems_dir, "brownian"))
    cloud = a.cloud(None)
    assert len(cloud) == 128
    assert cloud.seed == 7
    assert a.cloud(None, factor=2).dim == 2
