import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shared.numerics.errors import ExpressionError
from shared.numerics.expressions import Expression, check_dimension, parse_all


def value(text: str, **env: float) -> float:
    return float(Expression.parse(text).evaluate(env))


def test_precedence_and_left_associativity():
    assert value("1 + 2 * 3") == 7.0
    assert value("8 - 3 - 2") == 3.0
    assert value("8 / 4 / 2") == 1.0
    assert value("(1 + 2) * 3") == 9.0
    assert value("-2 * 3") == -6.0
    assert value("2 * -3") == -6.0


def test_functions_and_constants():
    assert value("pow(2, 3)") == 8.0
    assert value("min(1, 2) + max(1, 2)") == 3.0
    assert value("sign(-3)") == -1.0
    assert value("abs(-1.5)") == 1.5
    assert value("sqrt(16)") == 4.0
    assert value("log(e)") == pytest.approx(1.0)
    assert value("exp(0) + tanh(0)") == 1.0
    assert value("pi") == math.pi
    assert value("1.5e2") == 150.0


def test_variables_and_max_index():
    expr = Expression.parse("x1 * p2 + x3")
    assert expr.variables == frozenset({"x1", "p2", "x3"})
    assert expr.max_index == 3
    assert expr.at_point([1.0, 0.0, 2.0], p=[0.0, 4.0]) == 6.0


def test_numbers_parse_as_constants():
    expr = Expression.parse(0)
    assert expr.is_zero
    assert Expression.parse(2.5).evaluate({}) == 2.5


@pytest.mark.parametrize(
    "text",
    ["1 +", "foo(1)", "x0", "min(1)", "exp(1, 2)", "(1 + 2", "1 2", "y1", ""],
)
def test_malformed_expressions_raise(text):
    with pytest.raises(ExpressionError):
        Expression.parse(text)


def test_unbound_variable_and_non_finite_values():
    with pytest.raises(ExpressionError):
        Expression.parse("x2").at_point([1.0])
    with pytest.raises(ExpressionError):
        Expression.parse("1 / x1").at_point([0.0])


def test_check_dimension():
    exprs = parse_all(["x1", "x2"])
    check_dimension(exprs, 2)
    with pytest.raises(ExpressionError):
        check_dimension(exprs, 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=20))
def test_vectorized_evaluation_matches_pointwise(xs):
    expr = Expression.parse("x1 * x1 - 3 * tanh(x1) + max(x1, 0)")
    pts = np.array(xs).reshape(-1, 1)
    vectorized = expr.at_points(pts)
    pointwise = [expr.at_point([x]) for x in xs]
    assert np.allclose(vectorized, pointwise)


def test_constant_expression_broadcasts_over_points():
    out = Expression.parse("2").at_points(np.zeros((4, 2)))
    assert out.shape == (4,)
    assert np.all(out == 2.0)


def test_deep_nesting_is_rejected():
    with pytest.raises(ExpressionError, match="nests deeper"):
        Expression.parse("-" * 3000 + "x1")
    with pytest.raises(ExpressionError, match="nests deeper"):
        Expression.parse("(" * 500 + "x1" + ")" * 500)
    with pytest.raises(ExpressionError, match="tree is deeper"):
        Expression.parse(" + ".join(["x1"] * 400))
    assert value("(" * 20 + "1" + ")" * 20) == 1.0
    assert value(" + ".join(["1"] * 150)) == 150.0
