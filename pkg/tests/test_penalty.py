import math

import numpy as np
import pytest

from shared.numerics.funcspace import SampleCloud, quadratic_field
from shared.numerics.penalty import (
    Containment,
    CutOff,
    CutSide,
    PenaltyFamily,
    QuinticStep,
    XiBundle,
    apply_cutoff,
    certify_family,
    check_containment_jump_bounds,
    distance_field,
    eval_xi,
    log_containment,
)
from shared.schemas.reports import CheckStatus


@pytest.fixture
def wide_cloud() -> SampleCloud:
    return SampleCloud.grid(-3.0, 3.0, 13)


def test_log_containment():
    V = log_containment(1)
    assert V.value([0.0]) == 0.0
    assert V.value([2.0]) == pytest.approx(math.log(3.0))
    assert V.gradient([2.0])[0] == pytest.approx(2.0 / 3.0)
    assert V.hessian([2.0])[0, 0] == pytest.approx(1.0 / 3.0 - 4.0 / 9.0)


def test_default_containment_certifies(line_cloud):
    c = Containment.default(1)
    assert c.radius_for_level(math.log(3.0)) == pytest.approx(2.0)
    report = c.certify(line_cloud)
    assert report.status == CheckStatus.PASS
    assert [item.name for item in report.items] == [
        "inf_attained",
        "sublevel_compactness",
        "semi_concavity",
    ]


def test_too_convex_containment_fails_midpoint_test(line_cloud):
    c = Containment(V=quadratic_field([0.0], scale=2.0), kappa_v=1.0, argmin=(0.0,))
    report = c.certify(line_cloud)
    assert report.status == CheckStatus.FAIL
    assert [item.name for item in report.items if not item.passed] == ["semi_concavity"]


def test_containment_without_radius():
    with pytest.raises(NotImplementedError):
        Containment(V=quadratic_field([0.0])).radius_for_level(1.0)


def test_quintic_step():
    step = QuinticStep(4.0, 5.0)
    assert step([0.0, 4.0, 4.5, 5.0, 9.0]).tolist() == pytest.approx([1.0, 1.0, 0.5, 0.0, 0.0])
    assert float(step.d1(4.0)) == 0.0
    assert float(step.d1(5.0)) == 0.0
    assert float(step.d1(4.5)) == pytest.approx(-1.875)
    with pytest.raises(ValueError):
        QuinticStep(5.0, 4.0)


def test_family_validation():
    with pytest.raises(ValueError):
        PenaltyFamily(collection=3)
    with pytest.raises(ValueError):
        PenaltyFamily(R=4.0, Rp=3.0)
    assert PenaltyFamily().kappa_xi() == 1.0
    assert PenaltyFamily(collection=2).as_dict()["ellbar"] == {"lo": 4.0, "hi": 5.0}


def test_bounded_xi_reaches_plateau():
    family = PenaltyFamily(collection=2)
    xi = family.xi([0.0])
    assert xi.value([2.0]) == pytest.approx(2.0)
    assert xi.value([7.0]) == pytest.approx(family.plateau)
    assert xi.gradient([7.0]).tolist() == [0.0]
    zeta = family.zeta([0.0], [1.0])
    assert zeta.value([3.0]) == pytest.approx(3.0)
    assert zeta.value([6.0]) == 0.0


@pytest.mark.parametrize("collection", [1, 2])
def test_penalty_families_certify(wide_cloud, collection):
    report = certify_family(PenaltyFamily(collection=collection), wide_cloud)
    assert report.status == CheckStatus.PASS
    assert report.constants["kappa_xi"] >= 1.0 - 1e-9


def test_distance_is_not_a_penalty(wide_cloud):
    family = PenaltyFamily(xi_factory=distance_field)
    report = certify_family(family, wide_cloud)
    assert report.status == CheckStatus.FAIL
    failed = [item.name for item in report.items if not item.passed]
    assert "semi_concavity" in failed
    assert "domination" in failed


def test_xi_bundle():
    bundle = XiBundle(z0=[0.0], z1=[1.0], p=[1.0])
    assert eval_xi(bundle, [1.0]) == pytest.approx(1.5)
    assert eval_xi(bundle, [2.0]) == pytest.approx(4.5)
    assert eval_xi(bundle.base(), [2.0]) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        XiBundle(z0=[0.0], z1=[1.0], p=[1.0], variant="zeta")


def test_cutoffs():
    upper = CutOff(1.0)
    assert upper([0.5, 2.0, 5.0]).tolist() == pytest.approx([0.5, 1.75, 2.0])
    lower = CutOff(-1.0, CutSide.LOWER)
    assert lower([0.0, -2.0, -5.0]).tolist() == pytest.approx([0.0, -1.75, -2.0])
    assert upper.knot_jumps() < 1e-6
    assert lower.knot_jumps() < 1e-6


def test_apply_cutoff_chain_rule():
    f = apply_cutoff(CutOff(1.0), quadratic_field([0.0]))
    assert f.value([0.5]) == pytest.approx(0.125)
    assert f.gradient([0.5])[0] == pytest.approx(0.5)
    assert f.value([3.0]) == pytest.approx(2.0)
    assert f.gradient([3.0])[0] == 0.0
    assert f.bound_above == 2.0
    # inside the bend: Ω″ f′² + Ω′ f″ with f = 1.28, t = 0.28
    x = np.array([1.6])
    assert f.hessian(x)[0, 0] == pytest.approx(-0.5 * 1.6**2 + (1.0 - 0.14))


def test_containment_jump_bounds_hold():
    report = check_containment_jump_bounds(samples=10_000, seed=1, dim=2)
    assert report.status == CheckStatus.PASS
    assert len(report.items) == 4
