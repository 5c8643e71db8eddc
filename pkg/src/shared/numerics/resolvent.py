"""
Exact solves of f − λHf = h on finite state spaces and the comparison estimates that
follow from the discrete maximum principle.

H is given per control pair (θ₁, θ₂) by a generator matrix L_{θ₁θ₂} (nonnegative
off-diagonal rates, row sums ≤ 0) and a cost table 𝓘 with +∞ marking absent controls:

    Hf(x) = sup_{θ₁} inf_{θ₂} (L_{θ₁θ₂} f)(x) − 𝓘(x, θ₁, θ₂)
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
import numpy.typing as npt
from scipy import sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from shared.numerics.errors import (
    IsaacsCyclingError,
    IsaacsError,
    ResolventError,
    SingularSystemError,
)
from shared.numerics.parallel import parallel_map
from shared.schemas.reports import CheckReport, CheckStatus

logger = logging.getLogger(__name__)

Order = Literal["sup_inf", "inf_sup"]

RATE_TOLERANCE = 1e-12
RESIDUAL_TOLERANCE = 1e-9
COMPARISON_TOLERANCE = 1e-9
ISAACS_TOLERANCE = 1e-10
IDENTITY_TOLERANCE = 1e-8
MAX_HOWARD_ROUNDS = 200
MAX_GAME_ROUNDS = 100
MAX_VALUE_ITERATIONS = 200_000


@dataclass(frozen=True)
class FiniteProblem:
    states: npt.NDArray[np.float64]
    generators: dict[tuple[int, int], sparse.csr_matrix]
    cost: npt.NDArray[np.float64]
    lam: float
    h: npt.NDArray[np.float64]
    theta1: tuple[str, ...] = ("-",)
    theta2: tuple[str, ...] = ("-",)
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states.reshape(-1, 1)
        n, n1, n2 = len(states), len(self.theta1), len(self.theta2)
        h = np.asarray(self.h, dtype=np.float64).reshape(-1)
        cost = np.asarray(self.cost, dtype=np.float64).reshape(n, n1, n2)
        if h.size != n:
            raise ResolventError(f"h has {h.size} entries for {n} states")
        if not self.lam > 0:
            raise ResolventError("λ must be positive")
        if np.any(np.isnan(cost)) or np.any(cost == -np.inf):
            raise ResolventError("cost table holds NaN or −∞")
        generators = {}
        for i in range(n1):
            for j in range(n2):
                if (i, j) not in self.generators:
                    raise ResolventError(f"no generator for control pair ({i}, {j})")
                L = sparse.csr_matrix(self.generators[(i, j)], dtype=np.float64)
                if L.shape != (n, n):
                    raise ResolventError(f"generator ({i}, {j}) has shape {L.shape}")
                _validate_generator(L, (i, j))
                generators[(i, j)] = L
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "generators", generators)

    @classmethod
    def linear(
        cls, states: Any, L: Any, lam: float, h: Any, cost: Any | None = None, **kwargs: Any
    ) -> FiniteProblem:
        n = len(np.asarray(h).reshape(-1))
        c = np.zeros(n) if cost is None else np.asarray(cost, dtype=np.float64)
        return cls(states=states, generators={(0, 0): L}, cost=c, lam=lam, h=h, **kwargs)

    @property
    def n(self) -> int:
        return int(self.h.size)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.theta1), len(self.theta2)

    @property
    def is_linear(self) -> bool:
        return self.shape == (1, 1)

    @property
    def cost_free(self) -> bool:
        return bool(np.all(self.cost == 0.0))

    @property
    def max_rate(self) -> float:
        return max(float(np.max(-L.diagonal(), initial=0.0)) for L in self.generators.values())

    @property
    def leaking_rows(self) -> int:
        leaks = np.zeros(self.n, dtype=bool)
        for L in self.generators.values():
            leaks |= np.asarray(L.sum(axis=1)).reshape(-1) < -RATE_TOLERANCE
        return int(np.sum(leaks))

    def with_h(self, h: Any) -> FiniteProblem:
        return dataclasses.replace(self, h=np.asarray(h, dtype=np.float64))

    def with_lambda(self, lam: float) -> FiniteProblem:
        return dataclasses.replace(self, lam=float(lam))

    def payoff(self, f: npt.NDArray[np.float64]) -> np.ndarray:
        """
        (L_{θ₁θ₂} f)(x) − 𝓘(x, θ₁, θ₂) with −∞ for absent controls, shape (n, n1, n2).
        """

        n1, n2 = self.shape
        out = np.empty((self.n, n1, n2))
        for (i, j), L in self.generators.items():
            out[:, i, j] = L @ f
        with np.errstate(invalid="ignore"):
            out = out - self.cost
        out[~np.isfinite(self.cost)] = -np.inf
        return out

    def hamiltonian(self, f: npt.NDArray[np.float64], order: Order = "sup_inf") -> np.ndarray:
        payoff = self.payoff(f)
        return sup_inf_rows(payoff) if order == "sup_inf" else inf_sup_rows(payoff)

    def residual(self, f: npt.NDArray[np.float64], order: Order = "sup_inf") -> float:
        return float(np.max(np.abs(f - self.lam * self.hamiltonian(f, order) - self.h)))

    def isaacs_gap(self, f: npt.NDArray[np.float64]) -> float:
        payoff = self.payoff(f)
        return float(np.max(inf_sup_rows(payoff) - sup_inf_rows(payoff)))


def _validate_generator(L: sparse.csr_matrix, key: tuple[int, int]) -> None:
    off = L - sparse.diags(L.diagonal())
    if off.nnz and off.data.min() < -RATE_TOLERANCE:
        raise ResolventError(f"generator {key} has a negative off-diagonal rate")
    rows = np.asarray(L.sum(axis=1)).reshape(-1)
    scale = 1.0 + float(np.max(np.abs(L.diagonal()), initial=0.0))
    if np.any(rows > RATE_TOLERANCE * scale):
        bad = int(np.argmax(rows))
        raise ResolventError(f"generator {key} row {bad} sums to {rows[bad]} > 0")


def sup_inf_rows(payoff: np.ndarray) -> np.ndarray:
    present = np.isfinite(payoff)
    inner = np.where(present, payoff, np.inf).min(axis=2)
    inner[np.isposinf(inner)] = -np.inf
    out = inner.max(axis=1)
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise IsaacsError(f"no admissible control pair at state {bad}")
    return out


def inf_sup_rows(payoff: np.ndarray) -> np.ndarray:
    present = np.isfinite(payoff)
    inner = np.where(present, payoff, -np.inf).max(axis=1)
    inner[np.isneginf(inner)] = np.inf
    out = inner.min(axis=1)
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise IsaacsError(f"no admissible control pair at state {bad}")
    return out


@dataclass
class ResolventSolution:
    f: npt.NDArray[np.float64]
    residual: float
    iterations: int
    policy: npt.NDArray[np.int64] | None = None
    order: Order = "sup_inf"
    isaacs_gap: float = 0.0
    method: str = "direct"
    history: list[float] = field(default_factory=list)


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


def _solve_system(p: FiniteProblem, L: sparse.csr_matrix, c: np.ndarray) -> np.ndarray:
    A = (sparse.identity(p.n, format="csc") - p.lam * L.tocsc()).tocsc()
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            f = np.asarray(spsolve(A, p.h - p.lam * c), dtype=np.float64).reshape(-1)
        except MatrixRankWarning as exc:
            raise SingularSystemError("I − λL is singular") from exc
    if not np.all(np.isfinite(f)):
        raise SingularSystemError("I − λL produced a non-finite solution")
    return f


def _assert_residual(p: FiniteProblem, f: np.ndarray, order: Order) -> float:
    residual = p.residual(f, order)
    if residual > RESIDUAL_TOLERANCE * max(1.0, float(np.max(np.abs(p.h)))):
        logger.error("resolvent residual too large residual=%s", residual)
        raise ResolventError(f"resolvent residual {residual:.3e} exceeds tolerance")
    return residual


def _assert_maximum_principle(p: FiniteProblem, f: np.ndarray) -> None:
    if not p.cost_free:
        return
    norm_h = float(np.max(np.abs(p.h)))
    if float(np.max(np.abs(f))) > norm_h + RESIDUAL_TOLERANCE * (1.0 + norm_h):
        raise ResolventError("‖R(λ)h‖ exceeds ‖h‖ on a cost-free problem")
    if np.all(p.h >= 0) and np.any(f < -RESIDUAL_TOLERANCE * (1.0 + norm_h)):
        raise ResolventError("R(λ)h has a negative entry for h ≥ 0")


def solve_linear(p: FiniteProblem) -> ResolventSolution:
    """
    (I − λL) f = h − λ𝓘 by a sparse direct solve.
    """

    if not p.is_linear:
        raise ResolventError("solve_linear needs a single control pair")
    c = p.cost[:, 0, 0]
    if not np.all(np.isfinite(c)):
        raise ResolventError("the only control is absent at some state")
    f = _solve_system(p, p.generators[(0, 0)], c)
    residual = _assert_residual(p, f, "sup_inf")
    _assert_maximum_principle(p, f)
    logger.debug("linear resolvent n=%s lambda=%s residual=%s", p.n, p.lam, residual)
    return ResolventSolution(f=f, residual=residual, iterations=1)


def _evaluate_policy(p: FiniteProblem, policy: np.ndarray) -> np.ndarray:
    rows = np.arange(p.n)
    L = sparse.csr_matrix((p.n, p.n))
    for (i, j), Lij in p.generators.items():
        mask = (policy[:, 0] == i) & (policy[:, 1] == j)
        if np.any(mask):
            L = L + sparse.diags(mask.astype(np.float64)) @ Lij
    c = p.cost[rows, policy[:, 0], policy[:, 1]]
    return _solve_system(p, L.tocsr(), c)


def _slice(payoff: np.ndarray, axis: int, fixed: np.ndarray) -> np.ndarray:
    rows = np.arange(payoff.shape[0])
    return payoff[rows, :, fixed] if axis == 0 else payoff[rows, fixed, :]


def _improve(values: np.ndarray, current: np.ndarray, maximize: bool) -> np.ndarray:
    rows = np.arange(values.shape[0])
    best = np.argmax(values, axis=1) if maximize else np.argmin(values, axis=1)
    here, there = values[rows, current], values[rows, best]
    margin = 1e-12 * (1.0 + np.abs(here))
    better = (there > here + margin) if maximize else (there < here - margin)
    return np.where(better, best, current)


def _first_admissible(values: np.ndarray) -> np.ndarray:
    ok = np.isfinite(values)
    if not np.all(ok.any(axis=1)):
        bad = int(np.flatnonzero(~ok.any(axis=1))[0])
        raise IsaacsError(f"every control is absent at state {bad}")
    return np.argmax(ok, axis=1)


def _howard(
    p: FiniteProblem, axis: int, fixed: np.ndarray, maximize: bool
) -> tuple[np.ndarray, np.ndarray, int]:
    """
    Policy iteration for one player choosing along ``axis`` while the other plays ``fixed``.
    """

    absent = -np.inf if maximize else np.inf
    values = _slice(p.payoff(np.zeros(p.n)), axis, fixed)
    values = np.where(np.isfinite(values), values, absent)
    choice = _first_admissible(np.where(np.isfinite(values), values, np.nan))
    previous: np.ndarray | None = None
    for rounds in range(1, MAX_HOWARD_ROUNDS + 1):
        policy = np.stack([choice, fixed] if axis == 0 else [fixed, choice], axis=1)
        f = _evaluate_policy(p, policy)
        if previous is not None:
            drift = (previous - f) if maximize else (f - previous)
            if float(np.max(drift)) > RESIDUAL_TOLERANCE * (1.0 + float(np.max(np.abs(f)))):
                raise ResolventError("policy iteration values are not monotone")
        values = _slice(p.payoff(f), axis, fixed)
        values = np.where(np.isfinite(values), values, absent)
        update = _improve(values, choice, maximize)
        logger.debug("howard round=%s changed=%s", rounds, int(np.sum(update != choice)))
        if np.array_equal(update, choice):
            return choice, f, rounds
        previous, choice = f, update
    raise ResolventError(f"policy iteration did not settle in {MAX_HOWARD_ROUNDS} rounds")


def _bellman(p: FiniteProblem, order: Order) -> ResolventSolution:
    n1, n2 = p.shape
    zeros = np.zeros(p.n, dtype=int)
    if n2 == 1:
        choice, f, rounds = _howard(p, 0, zeros, maximize=True)
        policy = np.stack([choice, zeros], axis=1)
    else:
        choice, f, rounds = _howard(p, 1, zeros, maximize=False)
        policy = np.stack([zeros, choice], axis=1)
    residual = _assert_residual(p, f, order)
    _assert_maximum_principle(p, f)
    return ResolventSolution(
        f=f, residual=residual, iterations=rounds, policy=policy, order=order, method="howard"
    )


def _game_rounds(p: FiniteProblem, order: Order) -> ResolventSolution | None:
    """
    Outer best response for the player moving first, inner policy iteration for the
    other. Returns None when the outer policy revisits a state or runs out of rounds.
    """

    outer_axis = 0 if order == "sup_inf" else 1
    outer_max = order == "sup_inf"
    inner_axis = 1 - outer_axis
    payoff0 = p.payoff(np.zeros(p.n))
    outer_values = _outer_values(payoff0, order)
    choice = _first_admissible(np.where(np.isfinite(outer_values), outer_values, np.nan))
    seen: set[bytes] = set()
    history: list[float] = []
    for rounds in range(1, MAX_GAME_ROUNDS + 1):
        key = choice.tobytes()
        if key in seen:
            logger.warning("best-response iteration revisited a policy round=%s", rounds)
            return None
        seen.add(key)
        inner, f, _ = _howard(p, inner_axis, choice, maximize=not outer_max)
        history.append(float(np.max(f)))
        update = _improve(_outer_values(p.payoff(f), order), choice, outer_max)
        if np.array_equal(update, choice):
            policy = np.stack([choice, inner] if outer_axis == 0 else [inner, choice], axis=1)
            return ResolventSolution(
                f=f,
                residual=p.residual(f, order),
                iterations=rounds,
                policy=policy,
                order=order,
                method="policy_iteration",
                history=history,
            )
        choice = update
    logger.warning("best-response iteration hit its round budget rounds=%s", MAX_GAME_ROUNDS)
    return None


def _outer_values(payoff: np.ndarray, order: Order) -> np.ndarray:
    present = np.isfinite(payoff)
    if order == "sup_inf":
        inner = np.where(present, payoff, np.inf).min(axis=2)
        inner[np.isposinf(inner)] = -np.inf
        return inner
    inner = np.where(present, payoff, -np.inf).max(axis=1)
    inner[np.isneginf(inner)] = np.inf
    return inner


def _value_iteration(p: FiniteProblem, order: Order) -> ResolventSolution:
    """
    f ← (h + λ·H_c f)/(1 + λc) with H_c using L + cI, which has nonnegative entries.
    """

    c = p.max_rate
    eye = sparse.identity(p.n, format="csr")
    shifted = {key: (L + c * eye).tocsr() for key, L in p.generators.items()}
    f = p.h.copy()
    for k in range(1, MAX_VALUE_ITERATIONS + 1):
        nxt = (p.h + p.lam * _shifted_hamiltonian(p, shifted, f, order)) / (1.0 + p.lam * c)
        step = float(np.max(np.abs(nxt - f)))
        f = nxt
        if step <= 1e-14 * (1.0 + float(np.max(np.abs(f)))):
            break
    return ResolventSolution(
        f=f, residual=p.residual(f, order), iterations=k, order=order, method="value_iteration"
    )


def _shifted_hamiltonian(
    p: FiniteProblem, shifted: dict[tuple[int, int], Any], f: np.ndarray, order: Order
) -> np.ndarray:
    n1, n2 = p.shape
    payoff = np.empty((p.n, n1, n2))
    for (i, j), L in shifted.items():
        payoff[:, i, j] = L @ f
    with np.errstate(invalid="ignore"):
        payoff = payoff - p.cost
    payoff[~np.isfinite(p.cost)] = -np.inf
    return sup_inf_rows(payoff) if order == "sup_inf" else inf_sup_rows(payoff)


def _require_isaacs(p: FiniteProblem, f: np.ndarray, when: str) -> None:
    gap = p.isaacs_gap(f)
    tol = ISAACS_TOLERANCE * (1.0 + float(np.max(np.abs(f), initial=0.0)))
    if gap > tol:
        logger.error("isaacs condition fails when=%s gap=%s", when, gap)
        raise IsaacsError(f"Isaacs condition fails {when}: sup-inf ≠ inf-sup (gap {gap:.3e})")


def solve_bellman_isaacs(
    p: FiniteProblem, order: Order = "sup_inf", require_isaacs: bool = True
) -> ResolventSolution:
    """
    Policy iteration for Bellman problems (one nontrivial control set) and best-response
    policy iteration for Isaacs problems, with a damped value-iteration fallback.

    With both control sets nontrivial the discrete Isaacs condition is checked on 0 and h
    before solving and again at the solution. `require_isaacs=False` skips both checks and
    returns the value for the requested order of play.
    """

    n1, n2 = p.shape
    if n1 == 1 and n2 == 1:
        if np.all(np.isfinite(p.cost)):
            return solve_linear(p)
        raise ResolventError("the only control is absent at some state")
    if n1 == 1 or n2 == 1:
        return _bellman(p, order)

    if require_isaacs:
        _require_isaacs(p, np.zeros(p.n), "at f = 0")
        _require_isaacs(p, p.h, "at f = h")
    solution = _game_rounds(p, order)
    if solution is None:
        solution = _value_iteration(p, order)
        gap = p.isaacs_gap(solution.f)
        if gap > ISAACS_TOLERANCE:
            logger.error("best-response cycling with Isaacs gap=%s", gap)
            raise IsaacsCyclingError(
                f"best-response iteration cycles and sup-inf ≠ inf-sup (gap {gap:.3e})"
            )
    solution.residual = _assert_residual(p, solution.f, order)
    if require_isaacs:
        _require_isaacs(p, solution.f, "at the solution")
    solution.isaacs_gap = p.isaacs_gap(solution.f)
    if solution.isaacs_gap <= ISAACS_TOLERANCE:
        other: Order = "inf_sup" if order == "sup_inf" else "sup_inf"
        swapped = p.residual(solution.f, other)
        if swapped > RESIDUAL_TOLERANCE * max(1.0, float(np.max(np.abs(p.h)))):
            raise ResolventError(f"value depends on the order of play (residual {swapped:.3e})")
    _assert_maximum_principle(p, solution.f)
    logger.debug(
        "isaacs resolvent method=%s rounds=%s gap=%s",
        solution.method,
        solution.iterations,
        solution.isaacs_gap,
    )
    return solution


def solve(
    p: FiniteProblem, order: Order = "sup_inf", require_isaacs: bool = True
) -> ResolventSolution:
    if p.is_linear:
        return solve_linear(p)
    return solve_bellman_isaacs(p, order, require_isaacs)


# ---------------------------------------------------------------------------
# comparison checks
# ---------------------------------------------------------------------------


def _elapsed(start: float) -> float:
    return (time.perf_counter() - start) * 1000.0


def _pair_item(name: str, excess: list[float], witnesses: list[dict[str, Any]]) -> CheckReport:
    if not excess:
        return CheckReport(name=name, status=CheckStatus.SKIP, message="no pairs")
    k = int(np.argmax(excess))
    worst = excess[k]
    return CheckReport(
        name=name,
        status=CheckStatus.PASS if worst <= 0 else CheckStatus.FAIL,
        max_violation=max(worst, 0.0),
        witness=witnesses[k] if worst > 0 else {},
        constants={"pairs": len(excess), "worst_margin": worst},
    )


def verify_contraction(
    p: FiniteProblem,
    pairs: Sequence[tuple[Any, Any]],
    threads: int | None = None,
    order: Order = "sup_inf",
) -> CheckReport:
    """
    max(Rh₁ − Rh₂) ≤ max(h₁ − h₂) for every pair, and min(h₁,h₂) ↦ R monotone.
    """

    start = time.perf_counter()

    def job(pair: tuple[Any, Any]) -> dict[str, Any]:
        h1 = np.asarray(pair[0], dtype=np.float64)
        h2 = np.asarray(pair[1], dtype=np.float64)
        u, v = solve(p.with_h(h1), order).f, solve(p.with_h(h2), order).f
        low = solve(p.with_h(np.minimum(h1, h2)), order).f
        return {
            "contraction": float(np.max(u - v) - np.max(h1 - h2)) - COMPARISON_TOLERANCE,
            "monotone": float(np.max(low - v)) - COMPARISON_TOLERANCE,
            "norm": float(np.max(np.abs(u)) - np.max(np.abs(h1))) - COMPARISON_TOLERANCE,
            "positive": (
                float(-np.min(u)) - COMPARISON_TOLERANCE if np.all(h1 >= 0) else -math.inf
            ),
            "index": int(np.argmax(u - v)),
        }

    results = parallel_map(job, list(pairs), threads)
    names = ["contraction", "monotone"] + (["norm", "positive"] if p.cost_free else [])
    items = []
    for name in names:
        excess = [r[name] for r in results]
        witness = [{"pair": k, "state": p.states[r["index"]]} for k, r in enumerate(results)]
        items.append(_pair_item(name, excess, witness))
    report = CheckReport.from_items(
        "contraction",
        items,
        constants={"lambda": p.lam, "states": p.n, "leaking_rows": p.leaking_rows},
        runtime_ms=_elapsed(start),
    )
    logger.info("contraction pairs=%s status=%s", len(results), report.status.value)
    return report


def lyapunov_constant(p: FiniteProblem, V: npt.NDArray[np.float64]) -> float:
    """
    Discrete c_V: sup over states and admissible controls of (L V)(x) − 𝓘.
    """

    payoff = p.payoff(np.asarray(V, dtype=np.float64))
    finite = payoff[np.isfinite(payoff)]
    return float(np.max(finite)) if finite.size else -math.inf


@dataclass(frozen=True)
class StrictConstants:
    level: float
    c_eps: float
    c_v: float
    sup_v_k: float


def strict_constants(
    eps: float,
    lam: float,
    c_v: float,
    sup_v_k: float,
    norm_u: float,
    norm_v: float,
    norm_h1: float,
    norm_h2: float,
    inf_k_mix: float,
) -> StrictConstants:
    """
    Level of K̂ and C_ε of the strict comparison estimate.

    ``inf_k_mix`` is inf_K (u/(1−ε) − v/(1+ε)).
    """

    if not 0.0 < eps < 1.0:
        raise ValueError("ε must lie in (0, 1)")
    level = (norm_u + norm_v) / eps + sup_v_k
    c_eps = (
        2.0 / (1.0 - eps * eps) * (sup_v_k + lam * c_v)
        + (norm_h1 + norm_h2) / (1.0 - eps)
        - inf_k_mix
    )
    return StrictConstants(level=level, c_eps=c_eps, c_v=c_v, sup_v_k=sup_v_k)


def verify_strict_estimate(
    p: FiniteProblem,
    V: Any,
    K: Any,
    eps: float,
    pairs: Sequence[tuple[Any, Any]],
    threads: int | None = None,
    order: Order = "sup_inf",
) -> CheckReport:
    """
    max_K(Rh₁ − Rh₂) ≤ ε·C_ε + max_{K̂}(h₁ − h₂) with K̂ = {V ≤ (‖u‖+‖v‖)/ε + max_K V}.
    """

    start = time.perf_counter()
    v_vec = np.asarray(V, dtype=np.float64).reshape(-1)
    mask = np.zeros(p.n, dtype=bool)
    mask[np.asarray(K)] = True
    if not np.any(mask):
        raise ValueError("K must select at least one state")
    c_v = lyapunov_constant(p, v_vec)
    if not math.isfinite(c_v):
        return CheckReport(
            name="strict_estimate",
            status=CheckStatus.FAIL,
            message="discrete Lyapunov constant c_V is unbounded",
            constants={"c_V": c_v},
            runtime_ms=_elapsed(start),
        )
    sup_v_k = float(np.max(v_vec[mask]))

    def job(pair: tuple[Any, Any]) -> dict[str, Any]:
        h1 = np.asarray(pair[0], dtype=np.float64)
        h2 = np.asarray(pair[1], dtype=np.float64)
        u, v = solve(p.with_h(h1), order).f, solve(p.with_h(h2), order).f
        consts = strict_constants(
            eps,
            p.lam,
            c_v,
            sup_v_k,
            float(np.max(np.abs(u))),
            float(np.max(np.abs(v))),
            float(np.max(np.abs(h1))),
            float(np.max(np.abs(h2))),
            float(np.min(u[mask] / (1.0 - eps) - v[mask] / (1.0 + eps))),
        )
        khat = v_vec <= consts.level
        lhs = float(np.max((u - v)[mask]))
        rhs = eps * consts.c_eps + float(np.max((h1 - h2)[khat]))
        return {
            "excess": lhs - rhs - COMPARISON_TOLERANCE,
            "lhs": lhs,
            "rhs": rhs,
            "c_eps": consts.c_eps,
            "khat_size": int(np.sum(khat)),
        }

    results = parallel_map(job, list(pairs), threads)
    item = _pair_item(
        "strict_estimate",
        [r["excess"] for r in results],
        [{"pair": k, "lhs": r["lhs"], "rhs": r["rhs"]} for k, r in enumerate(results)],
    )
    return CheckReport(
        name="strict_estimate",
        status=item.status,
        max_violation=item.max_violation,
        witness=item.witness,
        constants={
            "eps": eps,
            "c_V": c_v,
            "sup_V_K": sup_v_k,
            "max_C_eps": max((r["c_eps"] for r in results), default=0.0),
            "khat_sizes": [r["khat_size"] for r in results],
        },
        runtime_ms=_elapsed(start),
    )


def check_resolvent_identity(
    p: FiniteProblem, lam: float, mu: float, h: Any, order: Order = "sup_inf"
) -> CheckReport:
    """
    R(λ)h = R(μ)(h + (λ − μ)H R(λ)h) for λ > μ > 0.
    """

    if not lam > mu > 0:
        raise ValueError("the resolvent identity is checked for λ > μ > 0")
    h_vec = np.asarray(h, dtype=np.float64)
    f = solve(p.with_lambda(lam).with_h(h_vec), order).f
    g = h_vec + (lam - mu) * p.hamiltonian(f, order)
    f_mu = solve(p.with_lambda(mu).with_h(g), order).f
    gap = float(np.max(np.abs(f - f_mu)))
    bound = IDENTITY_TOLERANCE * (1.0 + float(np.max(np.abs(f))))
    return CheckReport(
        name="resolvent_identity",
        status=CheckStatus.PASS if gap <= bound else CheckStatus.FAIL,
        max_violation=max(gap - bound, 0.0),
        witness={"state": p.states[int(np.argmax(np.abs(f - f_mu)))]} if gap > bound else {},
        constants={"lambda": lam, "mu": mu, "gap": gap},
    )
