import math

import numpy as np
import pytest

from shared.numerics.doubling import (
    DoublingProblem,
    assemble_lambda,
    jensen_perturb,
    run_trace,
    strict_bound,
)
from shared.numerics.errors import DimensionMismatchError, JensenSearchError
from shared.numerics.funcspace import FunctionField, SampleCloud, constant_field
from shared.numerics.operators import DiffusionOp
from shared.numerics.penalty import PenaltyFamily
from shared.schemas.reports import CheckStatus


def _problem(u: float = 0.0, v: float = 0.0, **kwargs) -> DoublingProblem:
    params = {
        "u": constant_field(u, dim=1),
        "v": constant_field(v, dim=1),
        "op": DiffusionOp(sigma=lambda x: np.eye(1)),
        "lam": 1.0,
        "h1": constant_field(u, dim=1),
        "h2": constant_field(v, dim=1),
        "K": SampleCloud.explicit([[0.0]]),
        "cloud": SampleCloud.grid(-2.0, 2.0, 17),
        "eps": 0.5,
        "c_v": 0.0,
    }
    params.update(kwargs)
    return DoublingProblem(**params)


def test_problem_validation():
    with pytest.raises(ValueError):
        _problem(eps=1.0)
    with pytest.raises(ValueError):
        _problem(phi=0.0)
    with pytest.raises(ValueError):
        _problem(lam=0.0)
    with pytest.raises(DimensionMismatchError):
        _problem(K=SampleCloud.explicit([[0.0, 0.0]]))
    assert _problem().containment is not None


def test_problem_parameters():
    prob = _problem()
    assert prob.eps1 == pytest.approx(1.0)
    assert prob.eps2 == pytest.approx(1.0 / 3.0)
    assert prob.containment_weights == (0.0, 0.0)
    assert prob.sandwich_bound(2.0) == pytest.approx(2.0 / 3.0)
    assert prob.kappa(2.0) == pytest.approx(8.0)
    half = _problem(phi=0.5)
    assert half.containment_weights == pytest.approx((0.5, 1.0 / 6.0))


def test_lambda_for_constant_solutions():
    lam = assemble_lambda(_problem(u=1.0), 2.0)
    assert lam.dim == 2
    assert lam.value([0.5, 0.5]) == pytest.approx(2.0)
    # the coupling term −(α/2)d² at distance 1
    assert lam.value([0.0, 1.0]) == pytest.approx(1.0)
    peak = lam.maximize()
    assert peak.value == pytest.approx(2.0)
    assert peak.discrete_value == pytest.approx(2.0)
    # diagonal ties resolve to the pair nearest the origin
    assert peak.y0.tolist() == pytest.approx([0.0])
    assert peak.y0p.tolist() == pytest.approx([0.0])
    assert not peak.on_boundary


def test_lambda_rejects_bad_alpha():
    with pytest.raises(ValueError):
        assemble_lambda(_problem(), 0.0)


def _bowl() -> FunctionField:
    return FunctionField(value_fn=lambda w: -0.5 * float(w @ w), dim=2, label="bowl")


def test_jensen_accepts_zero_shift_at_strict_max():
    result = jensen_perturb(_bowl(), ([0.0], [0.0]), PenaltyFamily(), 0.1, 0.1, 0.1)
    assert result.candidate == 0
    assert result.p1.tolist() == [0.0]
    assert result.p2.tolist() == [0.0]
    assert result.displacement <= 0.1
    assert result.value == pytest.approx(0.0, abs=1e-9)
    assert result.log == []


def test_jensen_validation():
    family = PenaltyFamily()
    with pytest.raises(ValueError):
        jensen_perturb(_bowl(), ([0.0], [0.0]), family, 0.0, 0.1, 0.1)
    with pytest.raises(JensenSearchError):
        jensen_perturb(_bowl(), ([0.0], [0.0]), family, 0.1, 0.6, 0.6)


def test_jensen_detects_missing_semi_convexity():
    cone = FunctionField(value_fn=lambda w: -float(np.linalg.norm(w)), dim=2)
    with pytest.raises(JensenSearchError, match="semi-convexity"):
        jensen_perturb(cone, ([0.0], [0.0]), PenaltyFamily(), 0.1, 0.1, 0.1, kappa=1.0)


def test_strict_bound_for_constant_solutions():
    bound = strict_bound(_problem(u=1.0))
    # (‖u‖ + ‖v‖)/ε + sup_K V
    assert bound.level == pytest.approx(2.0)
    # ‖h₁‖/(1−ε) cancels inf_K u/(1−ε)
    assert bound.c_eps == pytest.approx(0.0)
    assert bound.radius == pytest.approx(math.sqrt(2.0 * (math.e**2 - 1.0)))
    assert bound.flags == ()
    inside = bound.contains(_problem().V, np.array([[0.0], [3.0], [4.0]]))
    assert inside.tolist() == [True, True, False]


def test_trace_of_zero_solutions():
    # 2εφ/(1−ε²) < 1 leaves room for the Jensen tilt
    prob = _problem(eps=0.25)
    trace = run_trace(prob, [2.0, 4.0, 8.0], threads=1)
    assert [row.alpha for row in trace.rows] == [2.0, 4.0, 8.0]
    assert trace.passed
    assert trace.summary.rows == 3
    assert trace.summary.enlargements == 0
    names = [item.name for item in trace.report.items]
    assert names[:5] == [
        "displacement",
        "xi0_sandwich",
        "lambda_sandwich",
        "sup_lambda_monotone",
        "row_estimate",
    ]
    assert "hamiltonian_gap_bound" in names
    for row in trace.rows:
        assert row.alpha_d2_0 == 0.0
        assert row.sup_lambda == pytest.approx(0.0, abs=1e-12)
        # ½ε/(1−ε²) from the ±½εξ curvature of the two test functions, against 2ε/(1−ε²)
        assert row.gap == pytest.approx(2.0 / 15.0, rel=1e-4)
        assert row.gap_bound == pytest.approx(8.0 / 15.0, rel=1e-6)
    coalescence = next(i for i in trace.report.items if i.name == "optimizer_coalescence")
    assert coalescence.status == CheckStatus.PASS


@pytest.mark.parametrize("schedule", [[1.0, 2.0], [4.0, 2.0], [2.0, 2.0]])
def test_trace_schedule_validation(schedule):
    with pytest.raises(ValueError):
        run_trace(_problem(), schedule)


def test_single_row_schedule_has_no_trend():
    trace = run_trace(_problem(eps=0.25), [2.0], threads=1)
    assert trace.passed
    assert "no trend data" in trace.summary.flags
    assert trace.summary.trend["gap_nonincreasing"] is None


def test_strict_bound_radius_for_unit_solutions():
    # V(z) = log(1 + ½|z|²) ≤ (‖u‖ + ‖v‖)/ε = 4 inverts to |z| = √(2(e⁴ − 1))
    bound = strict_bound(_problem(u=1.0, v=1.0))
    assert bound.level == pytest.approx(4.0)
    assert bound.radius == pytest.approx(10.354, abs=1e-3)


def _tilted_bowl(rng: np.random.Generator) -> tuple[FunctionField, np.ndarray]:
    center = rng.uniform(-1.0, 1.0, size=2)
    curvature = rng.uniform(0.5, 2.0, size=2)
    wobble = rng.uniform(0.0, 0.5)
    offset = rng.uniform(-2.0, 2.0)

    def value(w: np.ndarray) -> float:
        d = w - center
        return offset - 0.5 * float(curvature @ (d * d)) + wobble * (math.cos(d[0]) - 1.0)

    return FunctionField(value_fn=value, dim=2, label="tilted_bowl"), center


def test_jensen_sandwich_over_random_functionals(rng):
    family = PenaltyFamily()
    eta, eps1, eps2 = 0.1, 0.1, 0.1
    for k in range(20):
        phi, center = _tilted_bowl(rng)
        top = phi.value(center)
        result = jensen_perturb(
            phi, ([center[0]], [center[1]]), family, eta, eps1, eps2, kappa=3.0, seed=k
        )
        assert result.sup_value == pytest.approx(top)
        assert top - 1e-9 <= result.value <= top + (eps1 + eps2) * eta + 1e-9
        assert np.linalg.norm(result.p1) < eta
        assert np.linalg.norm(result.p2) < eta
        assert result.displacement < eta


def test_gap_is_judged_by_its_liminf_against_the_final_bound():
    trace = run_trace(_problem(eps=0.25), [2.0, 4.0, 8.0], threads=1)
    tail = trace.rows[1:]
    gap_item = next(i for i in trace.report.items if i.name == "hamiltonian_gap_bound")
    assert gap_item.constants["tail_rows"] == 2
    assert gap_item.constants["liminf_gap"] == min(row.gap for row in tail)
    assert gap_item.constants["bound"] == trace.rows[-1].gap_bound
    assert trace.summary.liminf_gap == gap_item.constants["liminf_gap"]
    assert gap_item.status == CheckStatus.PASS
