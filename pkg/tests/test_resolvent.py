import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shared.numerics.errors import IsaacsError, ResolventError
from shared.numerics.resolvent import (
    FiniteProblem,
    check_resolvent_identity,
    lyapunov_constant,
    solve,
    strict_constants,
    verify_contraction,
    verify_strict_estimate,
)
from shared.schemas.reports import CheckStatus


def _cycle(n: int = 50) -> np.ndarray:
    L = np.zeros((n, n))
    for k in range(n):
        L[k, (k + 1) % n] += 1.0
        L[k, (k - 1) % n] += 1.0
        L[k, k] -= 2.0
    return L


def _cycle_problem(h, lam: float = 1.0) -> FiniteProblem:
    n = len(h)
    states = np.arange(n, dtype=np.float64) - n // 2
    return FiniteProblem.linear(states, _cycle(n), lam, h)


def test_two_state_chain():
    L = np.array([[-1.0, 1.0], [1.0, -1.0]])
    sol = solve(FiniteProblem.linear([[0.0], [1.0]], L, 1.0, [0.0, 1.0]))
    assert sol.f == pytest.approx([1.0 / 3.0, 2.0 / 3.0])
    assert sol.residual <= 1e-12
    assert sol.method == "direct"


def test_constants_are_fixed_points():
    sol = solve(_cycle_problem(np.full(50, 5.0)))
    assert np.allclose(sol.f, 5.0)
    p = FiniteProblem.linear(np.zeros((3, 1)), np.zeros((3, 3)), 2.0, [1.0, -2.0, 3.0])
    assert solve(p).f == pytest.approx([1.0, -2.0, 3.0])


def test_cost_enters_with_lambda():
    p = FiniteProblem.linear([[0.0]], np.zeros((1, 1)), 2.0, [1.0], cost=[0.25])
    # f = h − λ𝓘
    assert solve(p).f == pytest.approx([0.5])


def test_problem_validation():
    with pytest.raises(ResolventError, match="negative off-diagonal"):
        FiniteProblem.linear([[0.0], [1.0]], [[1.0, -1.0], [0.0, 0.0]], 1.0, [0.0, 0.0])
    with pytest.raises(ResolventError, match="sums to"):
        FiniteProblem.linear([[0.0], [1.0]], [[0.0, 1.0], [0.0, 0.0]], 1.0, [0.0, 0.0])
    with pytest.raises(ResolventError, match="λ must be positive"):
        FiniteProblem.linear([[0.0]], [[0.0]], 0.0, [0.0])
    with pytest.raises(ResolventError, match="entries for"):
        FiniteProblem.linear([[0.0], [1.0]], np.zeros((2, 2)), 1.0, [0.0], cost=np.zeros(2))


def _bellman_problem(cost_of_moving: float = 0.0) -> FiniteProblem:
    stay = np.zeros((2, 2))
    move = np.array([[-1.0, 1.0], [0.0, 0.0]])
    cost = np.zeros((2, 2, 1))
    cost[:, 1, 0] = cost_of_moving
    return FiniteProblem(
        states=[[0.0], [1.0]],
        generators={(0, 0): stay, (1, 0): move},
        cost=cost,
        lam=1.0,
        h=[0.0, 1.0],
        theta1=("stay", "move"),
    )


@pytest.mark.parametrize("cost, expected", [(0.0, 0.5), (0.2, 0.4), (2.0, 0.0)])
def test_bellman_picks_best_policy(cost, expected):
    p = _bellman_problem(cost)
    sol = solve(p)
    assert sol.method == "howard"
    assert sol.f == pytest.approx([expected, 1.0])
    assert p.residual(sol.f) <= 1e-9
    # the value dominates every stationary policy
    stay_only = FiniteProblem.linear(p.states, np.zeros((2, 2)), 1.0, p.h)
    assert np.all(sol.f >= solve(stay_only).f - 1e-12)


def _pennies(h: float = 0.0) -> FiniteProblem:
    zero = np.zeros((1, 1))
    return FiniteProblem(
        states=[[0.0]],
        generators={(i, j): zero for i in range(2) for j in range(2)},
        cost=[[[0.0, 1.0], [1.0, 0.0]]],
        lam=1.0,
        h=[h],
        theta1=("a", "b"),
        theta2=("c", "d"),
    )


def test_game_without_saddle_point_is_rejected():
    p = _pennies()
    with pytest.raises(IsaacsError, match="Isaacs condition fails at f = 0"):
        solve(p)
    low = solve(p, "sup_inf", require_isaacs=False)
    high = solve(p, "inf_sup", require_isaacs=False)
    assert low.f == pytest.approx([-1.0])
    assert high.f == pytest.approx([0.0])
    assert low.isaacs_gap == pytest.approx(1.0)
    assert p.isaacs_gap(low.f) == pytest.approx(1.0)


def _separable_game() -> FiniteProblem:
    # payoff (A_i + B_j)f − (a_i + b_j) splits between the players
    up = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, 0.0]])
    down = np.array([[0.0, 0.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, -1.0]])
    first, second = (np.zeros((3, 3)), up), (np.zeros((3, 3)), down)
    a, b = (0.0, 0.3), (0.2, 0.0)
    table = [[a[i] + b[j] for j in range(2)] for i in range(2)]
    return FiniteProblem(
        states=[[0.0], [1.0], [2.0]],
        generators={(i, j): first[i] + second[j] for i in range(2) for j in range(2)},
        cost=np.array([table] * 3),
        lam=1.0,
        h=[0.0, 1.0, 2.0],
        theta1=("rest", "up"),
        theta2=("rest", "down"),
    )


def test_separable_game_value_is_independent_of_order():
    p = _separable_game()
    low = solve(p, "sup_inf")
    high = solve(p, "inf_sup")
    assert np.max(np.abs(low.f - high.f)) <= 1e-12
    assert low.isaacs_gap <= 1e-12
    assert p.residual(low.f, "inf_sup") <= 1e-9
    assert p.residual(high.f, "sup_inf") <= 1e-9


def test_absent_controls_everywhere_are_rejected():
    p = FiniteProblem.linear([[0.0]], [[0.0]], 1.0, [0.0], cost=[np.inf])
    with pytest.raises(ResolventError):
        solve(p)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(-3, 3, allow_nan=False), min_size=8, max_size=8),
    st.lists(st.floats(-3, 3, allow_nan=False), min_size=8, max_size=8),
)
def test_contraction_on_cycle(h1, h2):
    p = _cycle_problem(np.zeros(8), lam=0.7)
    report = verify_contraction(p, [(np.array(h1), np.array(h2))], threads=1)
    assert report.status == CheckStatus.PASS


def test_contraction_report_items(rng):
    p = _cycle_problem(np.zeros(20))
    pairs = [(rng.normal(size=20), rng.normal(size=20)) for _ in range(5)]
    report = verify_contraction(p, pairs, threads=2)
    assert report.status == CheckStatus.PASS
    assert [item.name for item in report.items] == ["contraction", "monotone", "norm", "positive"]
    assert report.constants["leaking_rows"] == 0


def test_contraction_without_pairs_skips():
    report = verify_contraction(_cycle_problem(np.zeros(4)), [])
    assert all(item.status == CheckStatus.SKIP for item in report.items)


def test_lyapunov_constant():
    p = _cycle_problem(np.zeros(5))
    assert lyapunov_constant(p, np.ones(5)) == 0.0
    # the seam: V(1) + V(4) − 2V(0) at k = 0
    assert lyapunov_constant(p, np.arange(5.0) ** 2) == pytest.approx(17.0)


def test_strict_constants():
    c = strict_constants(0.5, 1.0, 2.0, 3.0, 1.0, 1.0, 1.0, 1.0, -1.0)
    assert c.level == pytest.approx(2.0 / 0.5 + 3.0)
    assert c.c_eps == pytest.approx(2.0 / 0.75 * (3.0 + 2.0) + 2.0 / 0.5 + 1.0)
    with pytest.raises(ValueError):
        strict_constants(1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_strict_estimate_on_whole_space(rng):
    n = 30
    p = _cycle_problem(np.zeros(n))
    V = np.log1p(0.5 * p.states[:, 0] ** 2)
    pairs = [(rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)) for _ in range(4)]
    for eps in (0.1, 0.5, 0.9):
        report = verify_strict_estimate(p, V, np.arange(n), eps, pairs, threads=1)
        assert report.status == CheckStatus.PASS
        assert report.constants["khat_sizes"] == [n] * 4


def test_strict_estimate_needs_states():
    p = _cycle_problem(np.zeros(4))
    with pytest.raises(ValueError):
        verify_strict_estimate(p, np.zeros(4), np.array([], dtype=int), 0.5, [])


def test_resolvent_identity():
    h = np.tanh(np.arange(50.0) - 25.0)
    p = _cycle_problem(h)
    report = check_resolvent_identity(p, 1.0, 0.5, h)
    assert report.status == CheckStatus.PASS
    with pytest.raises(ValueError):
        check_resolvent_identity(p, 0.5, 1.0, h)


def test_resolvent_identity_for_bellman():
    p = _bellman_problem(0.2)
    assert check_resolvent_identity(p, 1.0, 0.25, p.h).status == CheckStatus.PASS
