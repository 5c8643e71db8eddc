import math

import numpy as np
import pytest

from shared.numerics.couplings import (
    SURPLUS_NOTE,
    CoupledMeasure,
    JumpCoupling,
    check_controlled_growth,
    check_coupling_identity,
    check_coupling_max_principle,
    check_distance_increment_bound,
    check_pi_lipschitz,
    couple,
    coupled_walk,
    eval_coupling,
    idle_coupling,
    idle_rule,
    independent_coupling,
    independent_rule,
    map_rule,
    shifted_half_distance,
    synchronous_coupling,
    table_rule,
)
from shared.numerics.errors import CouplingError, DimensionMismatchError
from shared.numerics.funcspace import SampleCloud, quadratic_field
from shared.numerics.operators import (
    DiffusionOp,
    DriftConvexOp,
    JumpOp,
    SumOp,
    bump_field,
    map_measure,
    reflecting_map,
    walk_measure,
)
from shared.schemas.reports import CheckStatus


@pytest.fixture
def quadruple_cloud() -> SampleCloud:
    return SampleCloud.grid(-1.0, 1.0, 3, dim=4)


def test_synchronous_coupling_of_equal_measures():
    walk = walk_measure(1)
    pi = synchronous_coupling(walk, walk)
    assert len(pi) == 2
    assert np.array_equal(pi.z1, pi.z2)
    assert pi.marginal_defect()[0] == 0.0
    assert pi.transport_cost() == 0.0


def test_synchronous_coupling_sends_surplus_against_idle_copy():
    pi = synchronous_coupling(walk_measure(1, weight=1.0), walk_measure(1, weight=2.0))
    assert pi.marginal_defect()[0] == 0.0
    assert sorted(pi.weights.tolist()) == [1.0, 1.0, 1.0, 1.0]
    assert pi.transport_cost() == pytest.approx(2.0)


def test_independent_and_idle_couplings():
    walk = walk_measure(1)
    product = independent_coupling(walk, walk)
    assert len(product) == 4
    assert product.marginal_defect()[0] == 0.0
    assert product.transport_cost() == pytest.approx(8.0)
    idle = idle_coupling(walk, walk)
    assert len(idle) == 4
    assert idle.marginal_defect()[0] == 0.0
    assert idle.transport_cost() == pytest.approx(4.0)


def test_idle_atoms_are_dropped():
    pi = CoupledMeasure(
        z1=[[0.0], [1.0]],
        z2=[[0.0], [1.0]],
        weights=[5.0, 1.0],
        first=walk_measure(1),
        second=walk_measure(1),
    )
    assert len(pi) == 1
    # the declared walk also jumps to −1, which this coupling never does
    defect, where = pi.marginal_defect()
    assert defect == 1.0
    assert where["atom"] == [-1.0]


def test_sync_diffusion_satisfies_identity(plane_cloud):
    c = couple(SumOp(terms=(DiffusionOp(sigma=lambda x: np.eye(1)),)))
    f1 = quadratic_field(np.full(1, 0.5))
    f2 = bump_field(np.zeros((1, 1)), np.ones(1))
    report = check_coupling_identity(c, f1, f2, plane_cloud)
    assert report.status == CheckStatus.PASS
    assert report.constants["max_gap"] == pytest.approx(0.0, abs=1e-12)


def test_idle_walk_satisfies_identity(plane_cloud):
    c = coupled_walk(1, idle_rule)
    f1 = quadratic_field(np.full(1, 0.5))
    f2 = bump_field(np.zeros((1, 1)), np.ones(1))
    report = check_coupling_identity(c, f1, f2, plane_cloud)
    assert report.status == CheckStatus.PASS
    assert report.constants["max_marginal_defect"] == 0.0


def test_synchronous_walk_records_surplus_note(plane_cloud):
    c = coupled_walk(1)
    assert c.notes == (SURPLUS_NOTE,)
    report = check_coupling_identity(c, quadratic_field([0.0]), quadratic_field([1.0]), plane_cloud)
    assert report.status == CheckStatus.PASS
    assert report.notes == [SURPLUS_NOTE]


def test_wrong_marginals_break_identity(plane_cloud):
    rows = table_rule(lambda x, x2: [([1.0], [1.0], 1.0), ([-1.0], [-1.0], 0.5)])
    measure = walk_measure(1)
    c = couple(SumOp(terms=(JumpOp(mu=lambda x: measure),)), rows)
    report = check_coupling_identity(c, quadratic_field([0.0]), quadratic_field([0.0]), plane_cloud)
    assert report.status == CheckStatus.FAIL
    assert report.constants["max_marginal_defect"] == pytest.approx(0.5)
    # Ĥg − Hf1 − Hf2 = (x + x′ − 1)/2, worst at x = x′ = −1
    assert report.witness["gap"] == pytest.approx(-1.5)


def test_drift_is_not_coupled():
    op = SumOp(terms=(DriftConvexOp(b=lambda x: -x), DiffusionOp(sigma=lambda x: np.eye(1))))
    c = couple(op)
    assert [leaf.label for leaf in c.root.leaves()] == ["sync_diffusion"]
    assert c.jump_leaves() == []


def test_eval_coupling_checks_dimensions():
    c = coupled_walk(1)
    with pytest.raises(DimensionMismatchError):
        eval_coupling(c, quadratic_field([0.0, 0.0]), [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(DimensionMismatchError):
        eval_coupling(c, quadratic_field([0.0, 0.0]), [0.0], [0.0, 0.0])


def test_shifted_half_distance():
    g = shifted_half_distance([1.0], [0.0], alpha=2.0)
    w = np.array([3.0, 1.0])
    # u = (3 − 1) − (1 − 0) = 1
    assert g.value(w) == pytest.approx(1.0)
    assert np.allclose(g.gradient(w), [2.0, -2.0])
    assert np.allclose(g.hessian(w), [[2.0, -2.0], [-2.0, 2.0]])


def test_synchronous_couplings_annihilate_shifted_distance(rng):
    diffusion = couple(SumOp(terms=(DiffusionOp(sigma=lambda x: np.eye(1)),)))
    walk = coupled_walk(1)
    for _ in range(1000):
        x, x2 = rng.uniform(-3.0, 3.0, size=2)
        g = shifted_half_distance([0.0], [0.0], rng.uniform(1.0, 20.0))
        tol = 1e-12 * (1.0 + g.value([x, x2]))
        assert abs(eval_coupling(diffusion, g, [x], [x2])) <= tol
        assert abs(eval_coupling(walk, g, [x], [x2])) <= tol


def test_controlled_growth_of_synchronous_walk(quadruple_cloud):
    report = check_controlled_growth(coupled_walk(1), quadruple_cloud, [2.0, 8.0])
    assert report.status == CheckStatus.PASS
    assert report.constants["max_value"] == 0.0


def test_controlled_growth_fails_for_independent_walk(quadruple_cloud):
    report = check_controlled_growth(
        coupled_walk(1, independent_rule), quadruple_cloud, [2.0, 8.0]
    )
    assert report.status == CheckStatus.FAIL
    # independent jumps move coincident copies apart: 4α at α = 8
    assert report.envelope.value_at_zero == pytest.approx(32.0)


def test_controlled_growth_rejects_small_alpha(quadruple_cloud):
    with pytest.raises(ValueError):
        check_controlled_growth(coupled_walk(1), quadruple_cloud, [0.5])


def test_pi_lipschitz(plane_cloud):
    sync = coupled_walk(1).jump_leaves()[0]
    assert check_pi_lipschitz(sync.pi, plane_cloud) == 0.0
    independent = coupled_walk(1, independent_rule).jump_leaves()[0]
    assert math.isinf(check_pi_lipschitz(independent.pi, plane_cloud))


def test_pi_lipschitz_of_reflecting_map():
    leaf = JumpCoupling(
        base=JumpOp(mu=map_measure(reflecting_map)), rule=map_rule(reflecting_map)
    )
    cloud = SampleCloud.grid(-3.0, 3.0, 7, dim=2)
    assert check_pi_lipschitz(leaf.pi, cloud) == pytest.approx(1.0)


def test_pi_lipschitz_needs_distinct_pairs():
    diagonal = SampleCloud.explicit([[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(CouplingError):
        check_pi_lipschitz(coupled_walk(1).jump_leaves()[0].pi, diagonal)


def test_coupling_max_principle(plane_cloud):
    bumps = SampleCloud.grid(-1.0, 1.0, 3, dim=2)
    for c in (coupled_walk(1), couple(SumOp(terms=(DiffusionOp(sigma=lambda x: np.eye(1)),)))):
        assert check_coupling_max_principle(c, plane_cloud, bumps).status == CheckStatus.PASS


def test_distance_increment_bound_holds():
    report = check_distance_increment_bound(samples=10_000, seed=3, dim=2)
    assert report.status == CheckStatus.PASS
    assert report.constants["violations"] == 0
