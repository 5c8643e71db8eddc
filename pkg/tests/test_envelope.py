import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shared.numerics.envelope import (
    MAX_COALESCENCE_EXPONENT,
    coalescence_exponent,
    concave_majorant,
    envelope_certified,
    fit_envelope,
)


def test_concave_majorant_flattens_after_peak():
    knots_x, knots_y = concave_majorant([1.0, 2.0, 3.0], [1.0, 1.5, 1.2])
    assert knots_x.tolist() == [0.0, 1.0, 2.0, 3.0]
    assert knots_y.tolist() == [0.0, 1.0, 1.5, 1.5]


def test_concave_majorant_drops_points_under_the_hull():
    knots_x, knots_y = concave_majorant([1.0, 2.0, 4.0], [2.0, 2.1, 4.0])
    # (2, 2.1) lies below the chord from (1, 2) to (4, 4)
    assert knots_x.tolist() == [0.0, 1.0, 4.0]
    assert knots_y.tolist() == [0.0, 2.0, 4.0]


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.tuples(st.floats(0.01, 10.0), st.floats(-5.0, 5.0)),
        min_size=1,
        max_size=30,
    )
)
def test_concave_majorant_dominates_samples(samples):
    r = np.array([s[0] for s in samples])
    y = np.array([s[1] for s in samples])
    knots_x, knots_y = concave_majorant(r, y)
    assert np.all(np.diff(knots_y) >= 0)
    assert np.all(np.interp(r, knots_x, knots_y) >= y - 1e-9 * (1.0 + np.abs(y)))


def test_coalescence_exponent_of_reciprocal_ratio():
    d = 2.0 ** -np.arange(1, 7)
    exponent, shells = coalescence_exponent(d, 1.0 / d)
    assert shells == 6
    assert exponent == pytest.approx(1.0)


def test_coalescence_exponent_of_constant_ratio():
    d = 2.0 ** -np.arange(1, 7)
    exponent, _ = coalescence_exponent(d, np.full(d.size, 3.0))
    assert exponent == pytest.approx(0.0, abs=1e-9)


def test_coalescence_exponent_needs_two_shells():
    assert coalescence_exponent([0.3, 0.35], [5.0, 7.0]) == (0.0, 1)
    assert coalescence_exponent([0.0, 0.0], [1.0, 1.0]) == (0.0, 0)


def test_linear_data_is_certified():
    r = np.linspace(0.01, 1.0, 50)
    fit = fit_envelope(r, 2.0 * r, r)
    assert fit.value_at_zero == 0.0
    assert fit.initial_slope == pytest.approx(2.0)
    assert fit.coalescence_exponent <= MAX_COALESCENCE_EXPONENT
    assert envelope_certified(fit)


def test_negative_values_are_clipped():
    r = np.linspace(0.1, 1.0, 10)
    fit = fit_envelope(r, -r, r)
    assert max(fit.omega) == 0.0
    assert envelope_certified(fit)


def test_value_at_origin_blocks_certification():
    fit = fit_envelope([0.0, 1.0], [0.5, 1.0], [0.0, 1.0])
    assert fit.value_at_zero == 0.5
    assert not envelope_certified(fit)
    # a looser tolerance does not rescue a macroscopic value at zero
    assert not envelope_certified(fit, tolerance_scale=100.0)


def test_blow_up_near_coalescence_is_rejected():
    d = 2.0 ** -np.arange(1, 9)
    fit = fit_envelope(d, np.sqrt(d), d)
    assert fit.coalescence_exponent == pytest.approx(0.5, abs=1e-6)
    assert not envelope_certified(fit)
