import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shared.numerics.errors import (
    DimensionMismatchError,
    FieldBoundError,
    MissingDerivativeError,
    NonFiniteValueError,
)
from shared.numerics.funcspace import (
    FunctionField,
    SampleCloud,
    Smoothness,
    as_point,
    check_gradient_consistency,
    constant_field,
    direct_sum,
    distance_sq,
    fd_gradient,
    fd_hessian,
    linear_field,
    quadratic_field,
    shifted_distance_sq,
)
from shared.schemas.reports import CheckStatus

coords = st.floats(-5, 5, allow_nan=False)


def test_as_point_validates():
    assert as_point(3.0).tolist() == [3.0]
    with pytest.raises(DimensionMismatchError):
        as_point([1.0, 2.0], dim=3)
    with pytest.raises(NonFiniteValueError):
        as_point([np.inf])


def test_distances():
    assert distance_sq([0, 0], [3, 4]) == 25.0
    # shifting both copies by the same vector leaves the distance unchanged
    assert shifted_distance_sq([1, 1], [0, 0], [1, 1], [0, 0]) == 0.0
    with pytest.raises(DimensionMismatchError):
        distance_sq([0], [0, 0])


def test_quadratic_field_derivatives():
    f = quadratic_field([1.0, -1.0], scale=2.0)
    x = np.array([2.0, 1.0])
    assert f.value(x) == pytest.approx(5.0)
    assert np.allclose(f.gradient(x), [2.0, 4.0])
    assert np.allclose(f.hessian(x), 2.0 * np.eye(2))
    assert f.smoothness == Smoothness.CINF


def test_declared_bounds_are_enforced():
    f = constant_field(2.0)
    assert f.value([0.0]) == 2.0
    g = FunctionField(value_fn=lambda x: float(x[0]), bound_above=1.0, dim=1)
    assert g.value([0.5]) == 0.5
    with pytest.raises(FieldBoundError):
        g.value([3.0])


def test_missing_derivatives_raise():
    f = FunctionField(value_fn=lambda x: float(x @ x), dim=1)
    assert not f.has_gradient
    with pytest.raises(MissingDerivativeError):
        f.gradient([1.0])


def test_field_algebra():
    f = quadratic_field([0.0]) + linear_field([2.0])
    assert f.value([1.0]) == pytest.approx(2.5)
    assert np.allclose(f.gradient([1.0]), [3.0])
    g = -f
    assert g.value([1.0]) == pytest.approx(-2.5)
    h = f - 1.0
    assert h.value([1.0]) == pytest.approx(1.5)


def test_direct_sum_splits_coordinates():
    f = direct_sum(quadratic_field([0.0]), linear_field([1.0]), 1)
    assert f.dim == 2
    assert f.value([2.0, 3.0]) == pytest.approx(5.0)
    hess = f.hessian([2.0, 3.0])
    assert np.allclose(hess, [[1.0, 0.0], [0.0, 0.0]])


@settings(max_examples=40, deadline=None)
@given(st.lists(coords, min_size=2, max_size=2))
def test_fd_derivatives_match_quadratic(xs):
    f = quadratic_field([0.5, -0.5], scale=3.0)
    assert np.allclose(fd_gradient(f, xs), f.gradient(xs), atol=1e-5)
    assert np.allclose(fd_hessian(f, xs), f.hessian(xs), atol=1e-3)


def test_grid_cloud_layout_and_mesh():
    cloud = SampleCloud.grid(-1.0, 1.0, 5, dim=2)
    assert len(cloud) == 25
    assert cloud.dim == 2
    assert cloud.mesh == pytest.approx(0.5)
    assert cloud.on_boundary([1.0, 0.0])
    assert not cloud.on_boundary([0.0, 0.0])


def test_ball_cloud_is_seeded_and_inside_radius():
    a = SampleCloud.ball(2.0, 100, 3, seed=9)
    b = SampleCloud.ball(2.0, 100, 3, seed=9)
    assert np.array_equal(a.points, b.points)
    assert np.all(np.linalg.norm(a.points, axis=1) <= 2.0 + 1e-12)
    assert np.array_equal(a.regenerate().points, a.points)


def test_cloud_enlargement_keeps_mesh():
    cloud = SampleCloud.grid(-1.0, 1.0, 11)
    bigger = cloud.enlarged(2.0)
    assert bigger.mesh == pytest.approx(cloud.mesh)
    assert bigger.points.min() == pytest.approx(-2.0)


def test_pairs_cloud():
    cloud = SampleCloud.grid(0.0, 1.0, 3)
    pairs = cloud.pairs()
    assert pairs.dim == 2
    assert len(pairs) == 9


def test_empty_cloud_rejected():
    with pytest.raises(DimensionMismatchError):
        SampleCloud.explicit(np.zeros((0, 2)))


def test_gradient_consistency_report(line_cloud):
    good = quadratic_field([0.0])
    assert check_gradient_consistency(good, line_cloud).status == CheckStatus.PASS
    wrong = FunctionField(
        value_fn=lambda x: float(x @ x), gradient_fn=lambda x: 3.0 * x, dim=1
    )
    report = check_gradient_consistency(wrong, line_cloud)
    assert report.status == CheckStatus.FAIL
    assert "x" in report.witness
    no_grad = FunctionField(value_fn=lambda x: 0.0, dim=1)
    assert check_gradient_consistency(no_grad, line_cloud).status == CheckStatus.SKIP
