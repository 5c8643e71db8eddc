from __future__ import annotations

import math
from collections.abc import Iterator

import numpy as np
import pytest

from shared.numerics.errors import MeasureError, MissingDerivativeError, NumericsError
from shared.numerics.funcspace import FunctionField, SampleCloud, linear_field, quadratic_field
from shared.numerics.operators import (
    CostFunctional,
    CutProfile,
    DiffusionOp,
    DiscreteMeasure,
    DriftConvexOp,
    IsaacsOp,
    JumpOp,
    SumOp,
    bump_field,
    check_convex_hamiltonian,
    check_isaacs,
    check_maximum_principle,
    check_measure_family,
    check_semi_monotone,
    drift_parts,
    evaluate,
    lyapunov_bound,
    map_measure,
    reflecting_map,
    returning_walk_measure,
    stochastic_part,
    walk_measure,
    weight_w,
)
from shared.schemas.reports import CheckStatus


def _zero_drift() -> DriftConvexOp:
    return DriftConvexOp(b=lambda x: np.zeros(x.size), label="still")


class _AntiDiffusion:
    """
    −½ Δf: reverses the sign the maximum principle needs.
    """

    label = "anti"

    def apply(self, f, x) -> float:
        return -0.5 * float(np.trace(f.hessian(x)))

    def leaves(self) -> Iterator:
        yield self


def test_cut_profile_shape():
    cut = CutProfile()
    assert cut([0.0, 0.5, 1.0, 3.0]).tolist() == [1.0, 1.0, 0.0, 0.0]
    assert 0.0 < float(cut(0.75)) < 1.0
    with pytest.raises(ValueError):
        CutProfile(r0=1.0)


def test_weight_w_switches_between_square_and_log():
    w = weight_w([[0.25], [2.0]])
    assert w[0] == pytest.approx(0.0625)
    assert w[1] == pytest.approx(math.log(5.0))


def test_discrete_measure_validation():
    with pytest.raises(MeasureError):
        DiscreteMeasure(atoms=[[0.0]], weights=[1.0])
    with pytest.raises(MeasureError):
        DiscreteMeasure(atoms=[[1.0]], weights=[-1.0])
    with pytest.raises(MeasureError):
        DiscreteMeasure(atoms=[[1.0], [2.0]], weights=[1.0])
    m = DiscreteMeasure.from_pairs([([0.0], 5.0), ([1.0], 2.0), ([1.0], 1.0)], dim=1)
    assert len(m) == 2
    assert m.total_mass == 3.0
    assert m.grouped() == {(1.0,): 3.0}


def test_drift_convex_apply():
    op = DriftConvexOp(b=lambda x: -x, hconv=lambda p: 0.5 * float(p @ p))
    f = quadratic_field([0.0])
    # ⟨−x, x⟩ + ½x² at x = 2
    assert evaluate(op, f, [2.0]) == pytest.approx(-4.0 + 2.0)
    with pytest.raises(MissingDerivativeError):
        evaluate(op, FunctionField(value_fn=lambda x: 0.0, dim=1), [0.0])


def test_diffusion_apply_on_quadratic():
    op = DiffusionOp(sigma=lambda x: np.array([[2.0]]))
    assert evaluate(op, quadratic_field([0.0]), [0.7]) == pytest.approx(2.0)


def test_walk_on_quadratic_skips_compensator():
    op = JumpOp(mu=lambda x: walk_measure(1, weight=1.0))
    # χ vanishes at |z| = 1, so only the second difference remains
    assert evaluate(op, quadratic_field([0.0]), [0.3]) == pytest.approx(1.0)
    no_gradient = FunctionField(value_fn=lambda x: 0.5 * float(x @ x), dim=1)
    assert evaluate(op, no_gradient, [0.3]) == pytest.approx(1.0)


def test_small_jump_is_compensated():
    single = DiscreteMeasure(atoms=[[0.25]], weights=[1.0])
    op = JumpOp(mu=lambda x: single)
    assert evaluate(op, quadratic_field([0.0]), [1.0]) == pytest.approx(0.5 * 0.25**2)
    with pytest.raises(MissingDerivativeError):
        evaluate(op, FunctionField(value_fn=lambda x: 0.5 * float(x @ x), dim=1), [1.0])


def test_sum_and_tree_helpers():
    drift = DriftConvexOp(b=lambda x: -x)
    diffusion = DiffusionOp(sigma=lambda x: np.eye(1))
    jump = JumpOp(mu=lambda x: walk_measure(1))
    op = SumOp(terms=(drift, SumOp(terms=(diffusion, jump))))
    assert list(op.leaves()) == [drift, diffusion, jump]
    assert drift_parts(op) == [drift]
    assert stochastic_part(op).terms == (diffusion, jump)
    f = quadratic_field([0.0])
    assert evaluate(op, f, [1.0]) == pytest.approx(-1.0 + 0.5 + 1.0)


def test_semi_monotone_passes_for_contracting_drift(line_cloud):
    op = DriftConvexOp(b=lambda x: -x)
    report = check_semi_monotone(op, line_cloud, [2.0, 4.0])
    assert report.status == CheckStatus.PASS
    assert report.constants["one_sided_lipschitz"] == pytest.approx(-1.0)
    assert report.envelope is not None
    assert report.envelope.value_at_zero == 0.0


def test_semi_monotone_fails_for_discontinuous_drift():
    # grid with an even node count straddles the jump of sign(x)
    cloud = SampleCloud.grid(-1.0, 1.0, 20)
    op = DriftConvexOp(b=np.sign, label="sign")
    report = check_semi_monotone(op, cloud, [10.0, 100.0, 1000.0])
    assert report.status == CheckStatus.FAIL
    modulus = next(item for item in report.items if item.name == "modulus")
    assert modulus.status == CheckStatus.FAIL
    assert modulus.witness["x"][0] * modulus.witness["x_prime"][0] < 0


def test_semi_monotone_rejects_small_alpha(line_cloud):
    with pytest.raises(ValueError):
        check_semi_monotone(DriftConvexOp(b=lambda x: -x), line_cloud, [1.0, 2.0])


def test_convex_hamiltonian_detects_concavity():
    momenta = np.array([[-1.0], [1.0]])
    convex = DriftConvexOp(b=lambda x: x, hconv=lambda p: float(p @ p))
    concave = DriftConvexOp(b=lambda x: x, hconv=lambda p: -float(p @ p))
    assert check_convex_hamiltonian(convex, momenta).status == CheckStatus.PASS
    report = check_convex_hamiltonian(concave, momenta)
    assert report.status == CheckStatus.FAIL
    assert report.max_violation == pytest.approx(1.0, rel=1e-6)


def _game(table: list[list[float]]) -> IsaacsOp:
    cost = CostFunctional(table=lambda x: np.array(table), theta1=("a", "b"), theta2=("c", "d"))
    components = {(i, j): _zero_drift() for i in range(2) for j in range(2)}
    return IsaacsOp(components=components, cost=cost)


def test_isaacs_gap_of_matching_pennies(line_cloud):
    report = check_isaacs(_game([[0.0, 1.0], [1.0, 0.0]]), linear_field([1.0]), line_cloud)
    assert report.status == CheckStatus.FAIL
    assert report.constants["gap"] == pytest.approx(1.0)


def test_isaacs_holds_for_separable_cost(line_cloud):
    report = check_isaacs(_game([[0.0, 1.0], [2.0, 3.0]]), linear_field([1.0]), line_cloud)
    assert report.status == CheckStatus.PASS
    assert report.max_violation == 0.0


def test_absent_controls_are_skipped():
    op = _game([[0.0, math.inf], [1.0, 2.0]])
    f = linear_field([1.0])
    payoff = op.payoff(f, np.array([0.0]))
    assert payoff[0, 1] == -math.inf
    # row a keeps only column c
    assert op.apply(f, np.array([0.0])) == pytest.approx(0.0)


def test_isaacs_needs_every_component():
    cost = CostFunctional.zero(("a",), ("c", "d"))
    with pytest.raises(NumericsError, match="lacks components"):
        IsaacsOp(components={(0, 0): _zero_drift()}, cost=cost)


def test_lyapunov_plateau_for_constant_integrand(line_cloud):
    op = DiffusionOp(sigma=lambda x: np.eye(1))
    bound = lyapunov_bound(op, quadratic_field([0.0]), line_cloud, levels=3)
    assert bound.plateaued
    assert bound.value == pytest.approx(0.5)
    assert bound.report().status == CheckStatus.PASS
    assert len(bound.history) == 4


def test_lyapunov_warns_when_growing(line_cloud):
    op = DriftConvexOp(b=lambda x: x)
    bound = lyapunov_bound(op, quadratic_field([0.0]), line_cloud, levels=3)
    assert not bound.plateaued
    # sup of x² over the cloud scaled by 8
    assert bound.value == pytest.approx(256.0)
    assert bound.report().status == CheckStatus.WARN


def test_measure_family_for_walk(line_cloud):
    report = check_measure_family(lambda x: walk_measure(1), line_cloud)
    assert report.status == CheckStatus.PASS
    assert report.constants["sup_w_integral"] == pytest.approx(2.0 * math.log(2.0))


def test_measure_family_mass_bound(line_cloud):
    def heavy(x):
        return walk_measure(1, weight=10.0)

    report = check_measure_family(heavy, line_cloud, mass_bound=1.0)
    assert report.status == CheckStatus.FAIL
    assert [item.name for item in report.items if not item.passed] == ["w_integrable"]


def test_bump_field_derivatives_match_finite_differences():
    f = bump_field(np.array([[0.0], [1.0]]), np.array([1.0, -0.5]))
    x = np.array([0.3])
    h = 1e-5
    fd = (f.value(x + h) - f.value(x - h)) / (2 * h)
    assert f.gradient(x)[0] == pytest.approx(fd, rel=1e-6)
    fd2 = (f.value(x + h) - 2 * f.value(x) + f.value(x - h)) / h**2
    assert f.hessian(x)[0, 0] == pytest.approx(fd2, rel=1e-3)


def test_maximum_principle(line_cloud):
    bumps = SampleCloud.grid(-2.0, 2.0, 5)
    good = SumOp(terms=(DiffusionOp(sigma=lambda x: np.eye(1)), DriftConvexOp(b=lambda x: -x)))
    assert check_maximum_principle(good, line_cloud, bumps).status == CheckStatus.PASS
    walk = JumpOp(mu=lambda x: walk_measure(1))
    assert check_maximum_principle(walk, line_cloud, bumps).status == CheckStatus.PASS
    report = check_maximum_principle(_AntiDiffusion(), line_cloud, bumps)
    assert report.status == CheckStatus.FAIL
    assert report.max_violation == pytest.approx(1.0, rel=1e-6)


def test_walk_measures():
    m = walk_measure(2, weight=0.5)
    assert len(m) == 4
    assert m.total_mass == 2.0
    # the jump back to the origin vanishes at the origin
    assert len(returning_walk_measure(np.array([0.0]))) == 2
    assert len(returning_walk_measure(np.array([3.0]))) == 3


def test_reflecting_map_measure():
    mu = map_measure(reflecting_map)
    assert len(mu(np.array([0.5]))) == 0
    m = mu(np.array([2.5]))
    assert m.atoms.tolist() == [[-1.5]]
    assert reflecting_map(np.array([-3.0])).tolist() == [2.0]
