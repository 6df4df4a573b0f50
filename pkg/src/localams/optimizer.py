"""Per-client local AMSGrad state machine and the plain-SGD step.

States are values: every step builds a new state from the old one, so
distinct clients can be advanced concurrently without shared mutability
and any prefix of a trajectory can be replayed or inspected.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

from . import params
from .errors import DimensionMismatchError, NumericError
from .params import ParamVector

if TYPE_CHECKING:  # pragma: no cover
    from .objectives import GradientOracle


@dataclass(frozen=True)
class HyperParams:
    """Optimizer constants: base step size, momentum decays, floor ε.

    ``epsilon`` seeds the second-moment maximum (v̂ starts at ε²), which
    keeps every effective learning rate at or below 1/ε. ``g_inf_clip``,
    when set, clamps stochastic gradients into [−G∞, G∞] before they
    reach the moment updates.
    """

    alpha: float
    beta1: float = 0.9
    beta2: float = 0.99
    epsilon: float = 0.01
    g_inf_clip: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ValueError("alpha must be positive")
        if not 0.0 <= self.beta1 < 1.0:
            raise ValueError("beta1 must lie in [0, 1)")
        if not 0.0 <= self.beta2 < 1.0:
            raise ValueError("beta2 must lie in [0, 1)")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.g_inf_clip is not None and not self.g_inf_clip > 0.0:
            raise ValueError("g_inf_clip must be positive when set")


@dataclass
class LocalOptState:
    """One client's parameters and moment estimates.

    ``v`` is the exponential moving average of squared gradients and
    ``v_hat`` its running maximum; the effective per-coordinate step is
    alpha/sqrt(v_hat), derived on demand and never stored.
    """

    x: ParamVector
    m: ParamVector
    v: ParamVector
    v_hat: ParamVector
    local_step: int = 0
    global_round: int = 0

    @property
    def dim(self) -> int:
        return int(self.x.shape[0])

    def eta(self) -> ParamVector:
        """Current per-coordinate step scaling 1/sqrt(v_hat)."""
        return params.inv_sqrt(self.v_hat)


def init_local_state(x0: ParamVector, hp: HyperParams) -> LocalOptState:
    """Fresh state at ``x0``: zero momentum, v = v̂ = ε²."""
    x = params.as_param(x0)
    d = x.shape[0]
    floor = hp.epsilon * hp.epsilon
    return LocalOptState(
        x=x,
        m=params.zeros(d),
        v=params.full(d, floor),
        v_hat=params.full(d, floor),
        local_step=0,
        global_round=0,
    )


def _check_gradient(state: LocalOptState, g: ParamVector) -> None:
    if g.shape != state.x.shape:
        raise DimensionMismatchError(
            f"gradient length {g.shape[0]} does not match state dimension {state.dim}"
        )
    if not np.all(np.isfinite(g)):
        raise NumericError("gradient contains NaN or Inf")


def amsgrad_step(state: LocalOptState, g: ParamVector, hp: HyperParams) -> LocalOptState:
    """One local AMSGrad update.

    Moments move first, then the running max, then the parameters:
        m' = β₁ m + (1−β₁) g
        v' = β₂ v + (1−β₂) g⊙g
        v̂' = max(v̂, v')
        x' = x − α · m' / √v̂'
    No bias correction and no additive ε inside the square root — the
    max-clamp against the ε² initialization alone keeps v̂ positive.
    """
    _check_gradient(state, g)
    m_new = hp.beta1 * state.m + (1.0 - hp.beta1) * g
    v_new = hp.beta2 * state.v + (1.0 - hp.beta2) * g * g
    v_hat_new = params.elementwise_max(state.v_hat, v_new)
    eta = params.inv_sqrt(v_hat_new)
    x_new = state.x - hp.alpha * params.hadamard(m_new, eta)
    return LocalOptState(
        x=x_new,
        m=m_new,
        v=v_new,
        v_hat=v_hat_new,
        local_step=state.local_step + 1,
        global_round=state.global_round,
    )


def sgd_step(state: LocalOptState, g: ParamVector, lr: float) -> LocalOptState:
    """Plain gradient step x' = x − lr·g; moment fields pass through."""
    _check_gradient(state, g)
    return LocalOptState(
        x=state.x - lr * g,
        m=state.m,
        v=state.v,
        v_hat=state.v_hat,
        local_step=state.local_step + 1,
        global_round=state.global_round,
    )


# Called after every local step with (state before, clipped gradient,
# state after); used by the orchestration layer for metrics and audits.
StepObserver = Callable[[LocalOptState, ParamVector, LocalOptState], None]


def run_local_steps(
    state: LocalOptState,
    oracle: "GradientOracle",
    k_steps: int,
    hp: HyperParams,
    rng_stream: np.random.Generator,
    on_step: Optional[StepObserver] = None,
) -> LocalOptState:
    """Advance one client through ``k_steps`` stochastic AMSGrad updates.

    Gradients are drawn sequentially from ``rng_stream``, clipped to
    ``hp.g_inf_clip`` when that bound is set, and fed to `amsgrad_step`.
    The result is a pure function of (state, oracle, stream state).
    """
    if k_steps < 1:
        raise ValueError("k_steps must be at least 1")
    for _ in range(k_steps):
        g = oracle.stoch_grad(state.x, rng_stream)
        if hp.g_inf_clip is not None:
            g = params.clip_inf(g, hp.g_inf_clip)
        new_state = amsgrad_step(state, g, hp)
        if on_step is not None:
            on_step(state, g, new_state)
        state = new_state
    return state
