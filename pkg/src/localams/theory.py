"""Executable forms of the convergence guarantees.

The bound evaluators turn the analysis constants into numbers so
experiments can be checked against what the theory predicts:

* `theorem1_bound` — fixed local interval K, full participation.
* `theorem2_bound` — growing (logarithmic) local intervals.
* `rounds_to_epsilon` — iteration complexity via the Lambert W function.
* `check_z_identity` — verifies, step by step on a recorded trajectory,
  the exact decomposition of the auxiliary averaged sequence
  Z_r = x̄_r + β₁/(1−β₁)·(x̄_r − x̄_{r−1}) that underpins the analysis.

All functions are pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple

import numpy as np

from . import params
from .errors import DomainError
from .federation import (FixedInterval, IntervalSchedule, TrainingResult,
                         VhatAggregation, interval)
from .params import ParamVector


@dataclass(frozen=True)
class TheoryInputs:
    """Problem and algorithm constants the bounds are evaluated at.

    ``f_gap`` is the initial objective gap f(Z₁) − f*; ``G_inf`` caps
    every stochastic-gradient coordinate, so ε ≤ G∞ is required for the
    second-moment range [ε², G∞²] to be nonempty.
    """

    L: float
    sigma: float
    G_inf: float
    epsilon: float
    d: int
    beta1: float
    N: int
    K: int
    T: int
    alpha: float
    f_gap: float

    def __post_init__(self) -> None:
        if not self.L > 0.0:
            raise DomainError("smoothness constant must be positive")
        if self.sigma < 0.0:
            raise DomainError("noise level must be nonnegative")
        if not self.G_inf > 0.0:
            raise DomainError("gradient cap must be positive")
        if not 0.0 < self.epsilon <= self.G_inf:
            raise DomainError("epsilon must lie in (0, G_inf]")
        if self.d < 1 or self.N < 1 or self.K < 1 or self.T < 1:
            raise DomainError("d, N, K, T must be positive integers")
        if not 0.0 <= self.beta1 < 1.0:
            raise DomainError("beta1 must lie in [0, 1)")
        if not self.alpha > 0.0:
            raise DomainError("alpha must be positive")
        if self.f_gap < 0.0:
            raise DomainError("initial objective gap must be nonnegative")

    @property
    def alpha_cap(self) -> float:
        """Largest base step size the guarantee covers: 3ε/(20L)."""
        return 3.0 * self.epsilon / (20.0 * self.L)


def step_size_cap(epsilon: float, L: float) -> float:
    """3ε/(20L), the admissible-α ceiling shared by both bounds."""
    if not epsilon > 0.0 or not L > 0.0:
        raise DomainError("epsilon and L must be positive")
    return 3.0 * epsilon / (20.0 * L)


def _require_admissible_alpha(inp: TheoryInputs) -> None:
    if inp.alpha > inp.alpha_cap:
        raise DomainError(
            f"alpha={inp.alpha:.6g} exceeds the admissible cap "
            f"3*epsilon/(20*L)={inp.alpha_cap:.6g}; the guarantee does not apply"
        )


class BoundBreakdown(NamedTuple):
    """Total bound value plus its four named contributions."""

    total: float
    terms: Dict[str, float]


def _group_constants(inp: TheoryInputs) -> Dict[str, float]:
    """Inner constants of the four bound groups (before rate factors)."""
    b1 = inp.beta1
    G2 = inp.G_inf ** 2
    e = inp.epsilon
    gap2 = G2 - e * e  # G∞² − ε², the second-moment travel range
    alpha_sq_group = (
        2.0 * inp.L ** 2 * b1 ** 2 * G2 * inp.d / ((1.0 - b1) ** 2 * e ** 4)
        + inp.K ** 2 * inp.L ** 2 * G2 / e ** 4
        * (1.0 + 4.0 * inp.K ** 2 * (1.0 - b1) ** 2 * inp.d)
    )
    inv_t_group = (
        (2.0 - b1) * G2 * inp.K * inp.d * gap2 / ((1.0 - b1) * e ** 3)
        + 3.0 * inp.d * gap2 * G2 / (2.0 * e ** 3 * (1.0 - b1))
    )
    alpha_n_t_group = (
        5.0 * inp.L * G2 * inp.d * gap2 ** 2 / (8.0 * e ** 6 * (1.0 - b1) ** 2)
        * (2.0 * b1 ** 2 + (1.0 - b1) ** 2)
        + 5.0 * inp.L * inp.K * G2 * inp.d ** 2 * gap2 ** 2 / (2.0 * e ** 6)
    )
    noise_group = 5.0 * inp.L * inp.d * inp.sigma ** 2 / (4.0 * e * e)
    return {
        "alpha_sq": alpha_sq_group,
        "inv_t": inv_t_group,
        "alpha_n_t": alpha_n_t_group,
        "noise": noise_group,
    }


def theorem1_bound(inp: TheoryInputs) -> BoundBreakdown:
    """Bound on the averaged squared gradient norm for fixed interval K.

    Evaluates, verbatim,
        2G∞·f_gap/(αKT)
        + 2G∞·[ A_α·α² + A_T/T + A_NT·αN/T + A_σ·α/N ]
    and reports the pieces regrouped as C1 (gap + noise, the √(NKT)
    rate when α = √(N/KT)), C2 (α² group), C3 (1/T group) and C4
    (αN/T group). The terms sum exactly to the total.
    """
    _require_admissible_alpha(inp)
    pre = 2.0 * inp.G_inf
    groups = _group_constants(inp)
    c1 = pre * (inp.f_gap / (inp.alpha * inp.K * inp.T)
                + groups["noise"] * inp.alpha / inp.N)
    c2 = pre * groups["alpha_sq"] * inp.alpha ** 2
    c3 = pre * groups["inv_t"] / inp.T
    c4 = pre * groups["alpha_n_t"] * inp.alpha * inp.N / inp.T
    terms = {"C1": c1, "C2": c2, "C3": c3, "C4": c4}
    return BoundBreakdown(total=c1 + c2 + c3 + c4, terms=terms)


def schedule_iterations(schedule: IntervalSchedule, rounds: int) -> int:
    """Total local iterations Σ_{t<T} K_t under a schedule.

    Closed forms keep this O(log T) so bounds can be evaluated at very
    long horizons. For the log-adaptive schedule the floor-log sum is
    counted by thresholds: floor(log_base t) ≥ p exactly when
    t ≥ ceil(base**p), matching `interval`'s comparison semantics.
    """
    if rounds < 1:
        raise DomainError("rounds must be positive")
    if isinstance(schedule, FixedInterval):
        return schedule.k * rounds
    total = schedule.k_init * rounds
    p = 1
    while True:
        threshold = math.ceil(schedule.k_alpha ** p)
        if threshold > rounds - 1:
            return total
        total += rounds - threshold
        p += 1


def theory_step_size(n_clients: int, total_iterations: int, epsilon: float,
                     L: float) -> float:
    """The analysis step size min(√(N/ΣK_t), 3ε/(20L))."""
    if n_clients < 1 or total_iterations < 1:
        raise DomainError("client count and iteration budget must be positive")
    return min(math.sqrt(n_clients / total_iterations), step_size_cap(epsilon, L))


def theorem2_bound(inp: TheoryInputs, schedule: IntervalSchedule) -> float:
    """Bound for round-varying local intervals K_t.

    Uses the analysis step size min(√(N/ΣK_t), 3ε/(20L)) regardless of
    ``inp.alpha``; the final round's interval K_{T−1} enters the
    higher-order constants. With a fixed schedule the leading term
    matches `theorem1_bound`'s C1 at α = √(N/KT).
    """
    total_iters = schedule_iterations(schedule, inp.T)
    k_last = interval(schedule, inp.T - 1)
    pre = 2.0 * inp.G_inf
    b1 = inp.beta1
    G2 = inp.G_inf ** 2
    e = inp.epsilon
    gap2 = G2 - e * e
    ratio = inp.N / total_iters

    c1 = pre * (inp.f_gap + 5.0 * inp.L * inp.d * inp.sigma ** 2 / (4.0 * e * e))
    c2_1 = pre * 2.0 * inp.L ** 2 * b1 ** 2 * G2 * inp.d / ((1.0 - b1) ** 2 * e ** 4)
    c2_2 = pre * inp.L ** 2 * G2 / e ** 4
    c2_3 = pre * inp.L ** 2 * G2 / e ** 4 * 4.0 * (1.0 - b1) ** 2 * inp.d
    c3_1 = pre * (2.0 - b1) * G2 * inp.d * gap2 / ((1.0 - b1) * e ** 3)
    c3_2 = pre * 3.0 * inp.d * gap2 * G2 / (2.0 * e ** 3 * (1.0 - b1))
    c4_1 = pre * 5.0 * inp.L * G2 * inp.d * gap2 ** 2 / (8.0 * e ** 6 * (1.0 - b1) ** 2) \
        * (2.0 * b1 ** 2 + (1.0 - b1) ** 2)
    c4_2 = pre * 5.0 * inp.L * G2 * inp.d ** 2 * gap2 ** 2 / (2.0 * e ** 6)

    return (
        c1 / math.sqrt(inp.N * total_iters)
        + ratio * (c2_1 + c2_2 * k_last ** 2 + c2_3 * k_last ** 4)
        + (c3_1 * k_last + c3_2) / total_iters
        + ratio ** 1.5 * (c4_1 + c4_2 * k_last)
    )


# ---------------------------------------------------------------------------
# Iteration complexity via Lambert W


def lambert_w0(x: float) -> float:
    """Principal-branch W(x) for x ≥ 0: the w ≥ 0 with w·eʷ = x.

    Newton iteration from the initial guess ln(1+x), run to 1e−12
    relative tolerance; ln(1+x) upper-bounds the root on this domain,
    so the iterates descend monotonically onto it.
    """
    if x < 0.0:
        raise DomainError("nonnegative argument required on the principal branch")
    if x == 0.0:
        return 0.0
    w = math.log1p(x)
    for _ in range(100):
        ew = math.exp(w)
        step = (w * ew - x) / (ew * (1.0 + w))
        w -= step
        if abs(step) <= 1e-12 * max(1.0, abs(w)):
            break
    return w


def rounds_to_epsilon(n_clients: int, eps_target: float) -> float:
    """Iterations needed to reach a squared-gradient level ε²: x/W(x)
    with x = 1/(N·ε²). Decreasing in N — the linear-speedup statement."""
    if n_clients < 1:
        raise DomainError("need at least one client")
    if not eps_target > 0.0:
        raise DomainError("target accuracy must be positive")
    x = 1.0 / (n_clients * eps_target * eps_target)
    return x / lambert_w0(x)


# ---------------------------------------------------------------------------
# Auxiliary-sequence identity on recorded trajectories


def check_z_identity(result: TrainingResult) -> float:
    """Max coordinatewise residual of the Z-sequence decomposition.

    With Z_r = x̄_r + β₁/(1−β₁)(x̄_r − x̄_{r−1}) over the global step
    index r, the recorded trajectory must satisfy, at every step,

        Z_{r+1} − Z_r =
            αβ₁/(1−β₁) · meanᵢ[ M_{r−1,i} ⊙ (θ_{r−1,i} − θ_{r,i}) ]
          − αβ₁/(1−β₁) · meanᵢ[ (m_prev_i − M_{r−1,i}) ⊙ (θ_{r,i} − η_prev_i) ]
          − α · meanᵢ[ g_{r,i} ⊙ θ_{r,i} ]

    where the "prev" quantities are the client's own previous-step
    momentum/scaling inside a round and the broadcast values at a round
    boundary. The identity is exact algebra, so the residual measures
    only floating-point noise. Requires a run recorded with full
    history, full participation, average aggregation, no momentum
    restart, and a constant learning rate.
    """
    cfg = result.config
    if result.history is None:
        raise DomainError("trajectory was not recorded with full history")
    if not cfg.full_participation:
        raise DomainError("identity check requires full participation")
    if cfg.mode.variant is not VhatAggregation.AVERAGE or cfg.mode.restart_momentum:
        raise DomainError("identity check requires plain averaging without restart")
    if cfg.lr_decay != 1.0:
        raise DomainError("identity check requires a constant learning rate")

    hp = cfg.hp
    alpha, beta1 = hp.alpha, hp.beta1
    momentum_factor = alpha * beta1 / (1.0 - beta1)
    n = cfg.n_clients
    d = result.x0.shape[0]

    # Flatten the trajectory into global steps; each entry carries, per
    # client, everything both sides of the identity need.
    x_bar: List[ParamVector] = [result.x0.copy()]  # x̄_0 := x̄_1 (no step yet)
    steps = []  # (per-client dicts), index r-1
    for rh in result.history:
        clients = sorted(rh.steps)
        k_count = rh.k_steps
        for k in range(1, k_count + 1):
            per_client = []
            for cid in clients:
                rec = rh.steps[cid][k - 1]
                if k >= 2:
                    prev_rec = rh.steps[cid][k - 2]
                    m_prev = prev_rec.m_after
                    eta_prev = 1.0 / np.sqrt(prev_rec.v_hat_after)
                else:
                    m_prev = rh.broadcast_m
                    eta_prev = 1.0 / np.sqrt(rh.broadcast_v_hat)
                per_client.append({
                    "x": rec.x_before,
                    "g": rec.grad,
                    "m": rec.m_after,
                    "theta": 1.0 / np.sqrt(rec.v_hat_after),
                    "m_prev": m_prev,
                    "eta_prev": eta_prev,
                })
            x_bar.append(params.mean_of([pc["x"] for pc in per_client]))
            steps.append(per_client)
    if not steps:
        return 0.0
    last_round = result.history[-1]
    x_bar.append(params.mean_of(
        [last_round.steps[cid][-1].x_after for cid in sorted(last_round.steps)]))

    total_steps = len(steps)
    worst = 0.0
    for r in range(1, total_steps + 1):
        per_client = steps[r - 1]
        # Z uses x̄ at r−1, r, r+1 (x_bar list is offset by one: x̄_j = x_bar[j]).
        z_next = x_bar[r + 1] + beta1 / (1.0 - beta1) * (x_bar[r + 1] - x_bar[r])
        z_here = x_bar[r] + beta1 / (1.0 - beta1) * (x_bar[r] - x_bar[r - 1])
        lhs = z_next - z_here

        first = params.zeros(d)
        middle = params.zeros(d)
        descent = params.zeros(d)
        for idx, pc in enumerate(per_client):
            if r == 1:
                m_last = params.zeros(d)
                theta_last = params.full(d, 1.0 / hp.epsilon)
            else:
                # The client's own previous global step — at a round
                # boundary that is its final step of the prior round,
                # not the broadcast value.
                prev_pc = steps[r - 2][idx]
                m_last = prev_pc["m"]
                theta_last = prev_pc["theta"]
            first = first + m_last * (theta_last - pc["theta"])
            middle = middle + (pc["m_prev"] - m_last) * (pc["theta"] - pc["eta_prev"])
            descent = descent + pc["g"] * pc["theta"]
        rhs = (momentum_factor * first - momentum_factor * middle
               - alpha * descent) / n
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst
