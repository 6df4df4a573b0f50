"""Round orchestration for federated local AMSGrad.

One round is a barrier-synchronized fork-join: the server broadcasts
its state, selected clients run their local steps independently, and a
single fixed-order reduction aggregates the results. Client work is a
pure function of (broadcast state, the client's retained second-moment
average, client oracle, per-client stream), so the serial and
thread-pool execution paths produce bit-identical trajectories.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import params, rng
from .errors import DimensionMismatchError, DomainError
from .objectives import GradientOracle, ObjectiveSpec, make_oracles
from .optimizer import HyperParams, LocalOptState, run_local_steps
from .params import ParamVector


# ---------------------------------------------------------------------------
# Aggregation and interval policies


class VhatAggregation(Enum):
    """How the server combines the clients' second-moment maxima."""

    AVERAGE = "average"
    MAX = "max"


@dataclass(frozen=True)
class AggregationMode:
    """Server-side combination rule plus the momentum-restart switch.

    With ``restart_momentum`` the momentum is dropped from the protocol
    entirely: clients start each round from zero momentum, never send
    m, and the server's m stays zero — two vectors per client per round
    on the wire instead of three.
    """

    variant: VhatAggregation = VhatAggregation.AVERAGE
    restart_momentum: bool = False

    @property
    def vectors_per_client(self) -> int:
        return 2 if self.restart_momentum else 3


@dataclass(frozen=True)
class FixedInterval:
    """The same number of local steps every round."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise DomainError("fixed interval must be at least 1")


@dataclass(frozen=True)
class LogAdaptiveInterval:
    """Local steps grow logarithmically: K_t = K_init + ⌊log_base(t)⌋."""

    k_init: int
    k_alpha: float

    def __post_init__(self) -> None:
        if self.k_init < 1:
            raise DomainError("initial interval must be at least 1")
        if not self.k_alpha > 1.0:
            raise DomainError("log base must exceed 1")


IntervalSchedule = Union[FixedInterval, LogAdaptiveInterval]


def _floor_log(t: int, base: float) -> int:
    """Largest integer p with base**p ≤ t, computed exactly.

    The float estimate log(t)/log(base) can land one off at exact
    powers, so it is corrected by direct comparison.
    """
    p = max(0, int(math.floor(math.log(t) / math.log(base))))
    while base ** (p + 1) <= t:
        p += 1
    while p > 0 and base ** p > t:
        p -= 1
    return p


def interval(schedule: IntervalSchedule, t: int) -> int:
    """Number of local steps K_t for round t."""
    if t < 0:
        raise DomainError("round index must be nonnegative")
    if isinstance(schedule, FixedInterval):
        return schedule.k
    if t == 0:
        return schedule.k_init
    return schedule.k_init + _floor_log(t, schedule.k_alpha)


def select_clients(n_clients: int, n_selected: int,
                   stream: np.random.Generator) -> Tuple[int, ...]:
    """Uniform sample of client ids without replacement, ascending."""
    if not 1 <= n_selected <= n_clients:
        raise DomainError("need 1 <= participants <= clients")
    if n_selected == n_clients:
        return tuple(range(n_clients))
    picks = stream.choice(n_clients, size=n_selected, replace=False)
    return tuple(sorted(int(c) for c in picks))


# ---------------------------------------------------------------------------
# Server state and the broadcast/aggregate pair


@dataclass
class ServerState:
    """Aggregated parameters and moments after ``round_index`` rounds."""

    x: ParamVector
    m: ParamVector
    v_hat: ParamVector
    round_index: int = 0


def init_server(x0: ParamVector, hp: HyperParams) -> ServerState:
    """Server before any round: zero momentum, v̂ at its ε² floor."""
    x = params.as_param(x0)
    d = x.shape[0]
    return ServerState(
        x=x,
        m=params.zeros(d),
        v_hat=params.full(d, hp.epsilon * hp.epsilon),
        round_index=0,
    )


def broadcast(server: ServerState, client_id: int, mode: AggregationMode,
              v_prev: ParamVector) -> LocalOptState:
    """Client-side state at the start of a round.

    The communicated values overwrite what the client held: x and v̂ are
    copied down, and the momentum is either the server's or zero under
    restart. The inner average v never travels over the network — each
    client resumes its own running average ``v_prev`` (ε²·ones before
    the client's first round), which is what keeps a one-client,
    one-step-per-round run identical to the centralized optimizer.
    """
    d = server.x.shape[0]
    m = params.zeros(d) if mode.restart_momentum else server.m
    return LocalOptState(
        x=server.x,
        m=m,
        v=v_prev,
        v_hat=server.v_hat,
        local_step=0,
        global_round=server.round_index,
    )


def aggregate(client_states: Sequence[LocalOptState], mode: AggregationMode,
              t: int) -> ServerState:
    """Fold the participants' end-of-round states into the next server state.

    x and (unless restarted) m are averaged; v̂ is averaged or maxed
    according to the mode. The reduction order is the order of
    ``client_states``, which callers keep fixed for reproducibility.
    """
    if not client_states:
        raise DimensionMismatchError("cannot aggregate an empty client set")
    x = params.mean_of([s.x for s in client_states])
    if mode.restart_momentum:
        m = params.zeros(x.shape[0])
    else:
        m = params.mean_of([s.m for s in client_states])
    if mode.variant is VhatAggregation.MAX:
        v_hat = client_states[0].v_hat
        for s in client_states[1:]:
            v_hat = params.elementwise_max(v_hat, s.v_hat)
        v_hat = v_hat.copy()
    else:
        v_hat = params.mean_of([s.v_hat for s in client_states])
    return ServerState(x=x, m=m, v_hat=v_hat, round_index=t + 1)


# ---------------------------------------------------------------------------
# Trajectory recording


@dataclass
class StepRecord:
    """One local step of one client, as seen from outside."""

    x_before: ParamVector
    grad: ParamVector
    m_after: ParamVector
    v_hat_after: ParamVector
    x_after: ParamVector


@dataclass
class RoundHistory:
    """Everything that happened in one round, for audits and replays."""

    round_index: int
    k_steps: int
    participants: Tuple[int, ...]
    broadcast_x: ParamVector
    broadcast_m: ParamVector
    broadcast_v_hat: ParamVector
    steps: Dict[int, List[StepRecord]]
    server_after: ServerState


@dataclass
class RoundRecord:
    """Per-round scalars the metrics layer consumes."""

    round_index: int
    k_steps: int
    participants: Tuple[int, ...]
    comm_vectors: int
    eta_min: float
    eta_max: float
    server_x: ParamVector
    elapsed_s: float = 0.0


@dataclass
class TrainingResult:
    """Outcome of a full training run."""

    config: "RunConfig"
    x0: ParamVector
    rounds: List[RoundRecord]
    server: ServerState
    oracles: Sequence[GradientOracle]
    history: Optional[List[RoundHistory]] = None


# ---------------------------------------------------------------------------
# Run configuration and the training loop


@dataclass(frozen=True)
class RunConfig:
    """Complete, seed-reproducible description of one training run."""

    n_clients: int
    rounds: int
    hp: HyperParams
    schedule: IntervalSchedule
    objective: ObjectiveSpec
    seed: int
    participants_per_round: Optional[int] = None  # None means all clients
    mode: AggregationMode = field(default_factory=AggregationMode)
    lr_decay: float = 1.0  # per-round multiplier on alpha (1.0 = constant)
    x0: Optional[Tuple[float, ...]] = None  # None means the origin

    def __post_init__(self) -> None:
        if self.n_clients < 1:
            raise DomainError("need at least one client")
        s = self.selected_per_round
        if not 1 <= s <= self.n_clients:
            raise DomainError("participants_per_round must lie in [1, n_clients]")
        if self.rounds < 0:
            raise DomainError("rounds must be nonnegative")
        if not 0.0 < self.lr_decay <= 1.0:
            raise DomainError("lr_decay must lie in (0, 1]")
        if self.seed < 0:
            raise DomainError("seed must be nonnegative")

    @property
    def selected_per_round(self) -> int:
        return self.n_clients if self.participants_per_round is None \
            else self.participants_per_round

    @property
    def full_participation(self) -> bool:
        return self.selected_per_round == self.n_clients


class _ClientObserver:
    """Collects per-step scalars (and optionally full records) for one client."""

    def __init__(self, record_steps: bool) -> None:
        self.v_hat_min = math.inf
        self.v_hat_max = -math.inf
        self.records: Optional[List[StepRecord]] = [] if record_steps else None

    def __call__(self, before: LocalOptState, g: ParamVector,
                 after: LocalOptState) -> None:
        self.v_hat_min = min(self.v_hat_min, float(after.v_hat.min()))
        self.v_hat_max = max(self.v_hat_max, float(after.v_hat.max()))
        if self.records is not None:
            self.records.append(StepRecord(
                x_before=before.x,
                grad=g,
                m_after=after.m,
                v_hat_after=after.v_hat,
                x_after=after.x,
            ))


def _run_one_client(server: ServerState, client_id: int, oracle: GradientOracle,
                    k_steps: int, hp: HyperParams, mode: AggregationMode,
                    seed: int, t: int, record_steps: bool,
                    v_prev: ParamVector):
    local = broadcast(server, client_id, mode, v_prev)
    observer = _ClientObserver(record_steps)
    stream = rng.client_stream(seed, client_id, t)
    final = run_local_steps(local, oracle, k_steps, hp, stream, on_step=observer)
    return final, observer


def run_training(config: RunConfig, *, parallel: bool = False,
                 record_history: bool = False,
                 oracles: Optional[Sequence[GradientOracle]] = None) -> TrainingResult:
    """Execute the full federated loop: T rounds of select → broadcast →
    local steps → aggregate.

    The trajectory is a pure function of the config (plus the oracles,
    themselves derived from the config when not supplied); ``parallel``
    only changes how client work is scheduled, never the numbers.
    """
    if oracles is None:
        oracles = make_oracles(config.objective, config.n_clients, config.seed)
    if len(oracles) != config.n_clients:
        raise DimensionMismatchError("one oracle per client required")
    dim = oracles[0].dim
    x0 = params.zeros(dim) if config.x0 is None else params.as_param(config.x0)
    if x0.shape[0] != dim:
        raise DimensionMismatchError("x0 length does not match problem dimension")

    server = init_server(x0, config.hp)
    eps_sq = config.hp.epsilon * config.hp.epsilon
    client_v: List[ParamVector] = [params.full(dim, eps_sq)
                                   for _ in range(config.n_clients)]
    rounds: List[RoundRecord] = []
    history: Optional[List[RoundHistory]] = [] if record_history else None

    for t in range(config.rounds):
        round_started = time.perf_counter()
        k_steps = interval(config.schedule, t)
        hp_t = config.hp if config.lr_decay == 1.0 else \
            replace(config.hp, alpha=config.hp.alpha * config.lr_decay ** t)
        participants = select_clients(
            config.n_clients, config.selected_per_round,
            rng.selection_stream(config.seed, t))

        def client_task(cid: int):
            return _run_one_client(server, cid, oracles[cid], k_steps, hp_t,
                                   config.mode, config.seed, t, record_history,
                                   client_v[cid])

        if parallel and len(participants) > 1:
            with ThreadPoolExecutor(max_workers=min(8, len(participants))) as pool:
                outcomes = dict(zip(participants, pool.map(client_task, participants)))
        else:
            outcomes = {cid: client_task(cid) for cid in participants}

        finals = [outcomes[cid][0] for cid in participants]
        observers = [outcomes[cid][1] for cid in participants]
        for cid in participants:
            client_v[cid] = outcomes[cid][0].v

        broadcast_m = params.zeros(dim) if config.mode.restart_momentum else server.m
        prev = server
        server = aggregate(finals, config.mode, t)

        v_hat_min = min(o.v_hat_min for o in observers)
        v_hat_max = max(o.v_hat_max for o in observers)
        rounds.append(RoundRecord(
            round_index=t,
            k_steps=k_steps,
            participants=participants,
            comm_vectors=config.mode.vectors_per_client * len(participants),
            eta_min=1.0 / math.sqrt(v_hat_max),
            eta_max=1.0 / math.sqrt(v_hat_min),
            server_x=server.x,
            elapsed_s=time.perf_counter() - round_started,
        ))
        if history is not None:
            history.append(RoundHistory(
                round_index=t,
                k_steps=k_steps,
                participants=participants,
                broadcast_x=prev.x,
                broadcast_m=broadcast_m,
                broadcast_v_hat=prev.v_hat,
                steps={cid: outcomes[cid][1].records for cid in participants},
                server_after=server,
            ))

    return TrainingResult(config=config, x0=x0, rounds=rounds, server=server,
                          oracles=oracles, history=history)
