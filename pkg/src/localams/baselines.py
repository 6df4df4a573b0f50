"""Reference federated optimizers: plain averaging and server-side Adam.

Both reuse the optimizer module's SGD step for client work and the same
per-(seed, client, round) stream discipline as the main trainer, so
comparisons across methods see identical problem instances and noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from . import params, rng
from .errors import DimensionMismatchError, DomainError
from .objectives import GradientOracle
from .optimizer import LocalOptState, sgd_step
from .params import ParamVector


@dataclass
class ServerAdamState:
    """Server parameters plus Adam moments over round pseudo-gradients."""

    x: ParamVector
    m_s: ParamVector
    v_s: ParamVector
    eta_g: float
    beta1_s: float = 0.9
    beta2_s: float = 0.99
    eps_s: float = 1e-3

    def __post_init__(self) -> None:
        if not self.eta_g > 0.0:
            raise DomainError("server learning rate must be positive")
        if not 0.0 <= self.beta1_s < 1.0 or not 0.0 <= self.beta2_s < 1.0:
            raise DomainError("server momentum decays must lie in [0, 1)")
        if not self.eps_s > 0.0:
            raise DomainError("server epsilon must be positive")


def init_server_adam(x0: ParamVector, eta_g: float, beta1_s: float = 0.9,
                     beta2_s: float = 0.99, eps_s: float = 1e-3) -> ServerAdamState:
    x = params.as_param(x0)
    d = x.shape[0]
    return ServerAdamState(x=x, m_s=params.zeros(d), v_s=params.zeros(d),
                           eta_g=eta_g, beta1_s=beta1_s, beta2_s=beta2_s,
                           eps_s=eps_s)


def _local_sgd(x: ParamVector, oracle: GradientOracle, k_steps: int, lr: float,
               stream: np.random.Generator) -> ParamVector:
    d = x.shape[0]
    # Moment fields are inert for plain SGD; filled with neutral values.
    state = LocalOptState(x=x, m=params.zeros(d), v=params.zeros(d),
                          v_hat=params.full(d, 1.0))
    for _ in range(k_steps):
        g = oracle.stoch_grad(state.x, stream)
        state = sgd_step(state, g, lr)
    return state.x


def _client_average(x: ParamVector, oracles: Sequence[GradientOracle],
                    participants: Sequence[int], k_steps: int, lr: float,
                    seed: int, t: int) -> ParamVector:
    if not participants:
        raise DimensionMismatchError("need at least one participant")
    if k_steps < 1:
        raise DomainError("k_steps must be at least 1")
    if not lr > 0.0:
        raise DomainError("local learning rate must be positive")
    locals_: List[ParamVector] = []
    for cid in sorted(participants):
        stream = rng.client_stream(seed, cid, t)
        locals_.append(_local_sgd(x, oracles[cid], k_steps, lr, stream))
    return params.mean_of(locals_)


def fedavg_round(x: ParamVector, oracles: Sequence[GradientOracle],
                 participants: Sequence[int], k_steps: int, lr: float,
                 seed: int, t: int) -> ParamVector:
    """One averaging round: K local SGD steps per client, then the mean."""
    x = params.as_param(x)
    return _client_average(x, oracles, participants, k_steps, lr, seed, t)


def fedadam_round(state: ServerAdamState, oracles: Sequence[GradientOracle],
                  participants: Sequence[int], k_steps: int, lr: float,
                  seed: int, t: int) -> ServerAdamState:
    """One server-Adam round.

    The pseudo-gradient is the averaged client displacement
    Δ = x − mean(client x); the server applies an uncorrected Adam step
        m_s ← β₁ˢ m_s + (1−β₁ˢ) Δ
        v_s ← β₂ˢ v_s + (1−β₂ˢ) Δ²
        x  ← x − η_g · m_s / (√v_s + ε_s)
    with ε_s added outside the square root.
    """
    x_avg = _client_average(state.x, oracles, participants, k_steps, lr, seed, t)
    delta = state.x - x_avg
    m_s = state.beta1_s * state.m_s + (1.0 - state.beta1_s) * delta
    v_s = state.beta2_s * state.v_s + (1.0 - state.beta2_s) * delta * delta
    x_new = state.x - state.eta_g * m_s / (np.sqrt(v_s) + state.eps_s)
    return ServerAdamState(x=x_new, m_s=m_s, v_s=v_s, eta_g=state.eta_g,
                           beta1_s=state.beta1_s, beta2_s=state.beta2_s,
                           eps_s=state.eps_s)
