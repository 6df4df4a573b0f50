"""Experiment driver: metrics, CSV emission, and comparison studies.

`run_experiment` wraps the federated trainer with exact-gradient
metric evaluation; `speedup_sweep` and `interval_study` reproduce the
two headline comparisons (client-count scaling, fixed vs. growing
local intervals). Output is one CSV per (config, seed) with a fixed
schema; every float cell is serialized with ``repr`` so replays are
byte-identical.
"""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np

from . import params
from .errors import DomainError
from .federation import (FixedInterval, IntervalSchedule, LogAdaptiveInterval,
                         RunConfig, TrainingResult, interval, run_training)
from .objectives import (GradientOracle, global_grad, global_loss,
                         make_oracles, quadratic_minimizer,
                         smoothness_constant)
from .params import ParamVector
from .theory import schedule_iterations, step_size_cap

CSV_HEADER = ("round,iters,K_t,loss,grad_norm_sq,avg_grad_norm_sq,"
              "comm_vectors,eta_min,eta_max,seed")


@dataclass
class RoundMetrics:
    """One metrics row: state of the run after ``round_index`` rounds.

    ``iters`` counts cumulative local iterations Σ K_τ;
    ``avg_grad_norm_sq`` is the iteration-weighted running mean of the
    squared global gradient norm (the quantity the convergence analysis
    controls). Row 0 describes the starting point, with the running
    average seeded by the instantaneous value.
    """

    round_index: int
    iters: int
    k_steps: int
    loss: float
    grad_norm_sq: float
    avg_grad_norm_sq: float
    comm_vectors: int
    eta_min: float
    eta_max: float
    wall_clock: float


@dataclass
class ExperimentResult:
    """Metrics table plus the underlying training trajectory."""

    config: RunConfig
    metrics: List[RoundMetrics]
    training: TrainingResult

    @property
    def final(self) -> RoundMetrics:
        return self.metrics[-1]


def _grad_norm_sq(oracles: Sequence[GradientOracle], x: ParamVector) -> float:
    g = global_grad(oracles, x)
    return float(np.dot(g, g))


def run_experiment(config: RunConfig, *, parallel: bool = False,
                   record_history: bool = False,
                   per_step_metrics: bool = False) -> ExperimentResult:
    """Train under ``config`` and evaluate exact-gradient metrics.

    Default metrics are per-round, on the aggregated parameters; with
    ``per_step_metrics`` the running average instead uses the
    instantaneous client-average iterate at every local step
    (reconstructed from full history, which it implies). The metrics
    table always has rounds+1 rows, the first describing the start.
    """
    training = run_training(config, parallel=parallel,
                            record_history=record_history or per_step_metrics)
    oracles = training.oracles
    eta0 = 1.0 / config.hp.epsilon

    gns0 = _grad_norm_sq(oracles, training.x0)
    metrics = [RoundMetrics(
        round_index=0, iters=0, k_steps=0,
        loss=global_loss(oracles, training.x0),
        grad_norm_sq=gns0, avg_grad_norm_sq=gns0,
        comm_vectors=0, eta_min=eta0, eta_max=eta0, wall_clock=0.0,
    )]

    iters = 0
    gns_weighted_sum = 0.0
    for record in training.rounds:
        iters += record.k_steps
        gns = _grad_norm_sq(oracles, record.server_x)
        if per_step_metrics:
            rh = training.history[record.round_index]
            clients = sorted(rh.steps)
            for k in range(rh.k_steps):
                x_bar = params.mean_of([rh.steps[c][k].x_before for c in clients])
                gns_weighted_sum += _grad_norm_sq(oracles, x_bar)
        else:
            gns_weighted_sum += record.k_steps * gns
        metrics.append(RoundMetrics(
            round_index=record.round_index + 1,
            iters=iters,
            k_steps=record.k_steps,
            loss=global_loss(oracles, record.server_x),
            grad_norm_sq=gns,
            avg_grad_norm_sq=gns_weighted_sum / iters,
            comm_vectors=record.comm_vectors,
            eta_min=record.eta_min,
            eta_max=record.eta_max,
            wall_clock=record.elapsed_s,
        ))
    return ExperimentResult(config=config, metrics=metrics, training=training)


# ---------------------------------------------------------------------------
# CSV emission


def _cell(value) -> str:
    if isinstance(value, bool):  # bool is an int subclass; be explicit
        raise TypeError("no boolean cells in the schema")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def csv_text(metrics: Sequence[RoundMetrics], seed: int) -> str:
    """Render the metrics table in the fixed schema, newline-terminated.

    Floats are written with ``repr`` (shortest round-trip form), so the
    same trajectory always yields the same bytes. The wall-clock field
    is deliberately not part of the schema — it would break replay
    equality.
    """
    lines = [CSV_HEADER]
    for m in metrics:
        lines.append(",".join([
            _cell(m.round_index), _cell(m.iters), _cell(m.k_steps),
            _cell(m.loss), _cell(m.grad_norm_sq), _cell(m.avg_grad_norm_sq),
            _cell(m.comm_vectors), _cell(m.eta_min), _cell(m.eta_max),
            _cell(seed),
        ]))
    return "\n".join(lines) + "\n"


def write_csv(metrics: Sequence[RoundMetrics], seed: int, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text(metrics, seed))


# ---------------------------------------------------------------------------
# Thresholds


def quadratic_threshold(oracles: Sequence[GradientOracle],
                        x0: ParamVector) -> Tuple[float, float]:
    """(f*, target): target loss closing 99.9% of the initial gap.

    Uses the closed-form optimum of the averaged quadratics, so the
    threshold is exact and scale-free.
    """
    x_star = quadratic_minimizer(oracles)
    f_star = global_loss(oracles, x_star)
    f0 = global_loss(oracles, x0)
    return f_star, f_star + 1e-3 * (f0 - f_star)


def iters_to_loss(metrics: Sequence[RoundMetrics], target: float) -> float:
    """Cumulative iterations at the first row with loss ≤ target (inf if none)."""
    for m in metrics:
        if m.loss <= target:
            return float(m.iters)
    return math.inf


def rounds_to_loss(metrics: Sequence[RoundMetrics], target: float) -> float:
    """Round count at the first row with loss ≤ target (inf if none)."""
    for m in metrics:
        if m.loss <= target:
            return float(m.round_index)
    return math.inf


# ---------------------------------------------------------------------------
# Client-count scaling study


@dataclass
class SweepEntry:
    """Median outcomes for one client count, plus the per-seed detail."""

    n_clients: int
    alphas: List[float]
    iters_to_target: List[float]
    final_avg_gns: List[float]

    @property
    def median_iters_to_target(self) -> float:
        return statistics.median(self.iters_to_target)

    @property
    def median_final_avg_gns(self) -> float:
        return statistics.median(self.final_avg_gns)


def _theory_alpha_for(oracles: Sequence[GradientOracle], n_clients: int,
                      total_iters: int, epsilon: float) -> float:
    cap = step_size_cap(epsilon, smoothness_constant(oracles))
    return min(math.sqrt(n_clients / total_iters), cap)


def speedup_sweep(base: RunConfig, n_values: Sequence[int],
                  seeds: Sequence[int], *, parallel: bool = False) -> List[SweepEntry]:
    """Scaling of the averaged gradient metric with the client count.

    Each N runs the base config at the analysis step size
    min(√(N/ΣK_t), 3ε/(20L)) — L taken exactly from that seed's
    quadratic instance — and reports iterations-to-threshold and the
    final averaged squared gradient norm across seeds.
    """
    if len(n_values) < 2:
        raise DomainError("need at least two client counts to compare")
    if len(seeds) < 5:
        raise DomainError("need at least five seeds for stable medians")
    total_iters = schedule_iterations(base.schedule, base.rounds)
    entries: List[SweepEntry] = []
    for n in n_values:
        alphas: List[float] = []
        iters: List[float] = []
        finals: List[float] = []
        for seed in seeds:
            oracles = make_oracles(base.objective, n, seed)
            alpha = _theory_alpha_for(oracles, n, total_iters, base.hp.epsilon)
            cfg = replace(base, n_clients=n, seed=seed,
                          participants_per_round=None,
                          hp=replace(base.hp, alpha=alpha))
            outcome = run_experiment(cfg, parallel=parallel)
            x0 = outcome.training.x0
            _, target = quadratic_threshold(oracles, x0)
            alphas.append(alpha)
            iters.append(iters_to_loss(outcome.metrics, target))
            finals.append(outcome.final.avg_grad_norm_sq)
        entries.append(SweepEntry(n_clients=n, alphas=alphas,
                                  iters_to_target=iters, final_avg_gns=finals))
    return entries


# ---------------------------------------------------------------------------
# Fixed vs. growing local-interval study


@dataclass
class ScheduleOutcome:
    """Per-seed results for one interval schedule under a shared budget."""

    label: str
    rounds_budget: int
    rounds_to_target: List[float]
    loss_curves: List[List[float]]  # one per seed, indexed by round

    @property
    def median_rounds_to_target(self) -> float:
        return statistics.median(self.rounds_to_target)


@dataclass
class IntervalStudy:
    fixed: ScheduleOutcome
    adaptive: ScheduleOutcome


def _rounds_for_budget(schedule: IntervalSchedule, budget: int) -> int:
    """Smallest round count whose cumulative iterations reach the budget."""
    total = 0
    t = 0
    while total < budget:
        total += interval(schedule, t)
        t += 1
    return t


def _run_schedule(base: RunConfig, schedule: IntervalSchedule, rounds: int,
                  alpha: float, seeds: Sequence[int], label: str,
                  parallel: bool) -> ScheduleOutcome:
    to_target: List[float] = []
    curves: List[List[float]] = []
    for seed in seeds:
        cfg = replace(base, schedule=schedule, rounds=rounds, seed=seed,
                      hp=replace(base.hp, alpha=alpha))
        outcome = run_experiment(cfg, parallel=parallel)
        _, target = quadratic_threshold(outcome.training.oracles,
                                        outcome.training.x0)
        to_target.append(rounds_to_loss(outcome.metrics, target))
        curves.append([m.loss for m in outcome.metrics])
    return ScheduleOutcome(label=label, rounds_budget=rounds,
                           rounds_to_target=to_target, loss_curves=curves)


def interval_study(base: RunConfig, fixed: FixedInterval,
                   adaptive: LogAdaptiveInterval, seeds: Sequence[int], *,
                   parallel: bool = False) -> IntervalStudy:
    """Communication efficiency of a growing interval vs. a fixed one.

    The adaptive schedule runs for ``base.rounds`` rounds; the fixed
    schedule gets the round count that matches (just reaches) the same
    total iteration budget. Both use the analysis step size for that
    shared budget, so the comparison isolates the interval policy.
    """
    if not seeds:
        raise DomainError("need at least one seed")
    budget = schedule_iterations(adaptive, base.rounds)
    fixed_rounds = _rounds_for_budget(fixed, budget)
    oracles = make_oracles(base.objective, base.n_clients, seeds[0])
    alpha = _theory_alpha_for(oracles, base.n_clients, budget, base.hp.epsilon)
    return IntervalStudy(
        fixed=_run_schedule(base, fixed, fixed_rounds, alpha, seeds,
                            f"fixed-{fixed.k}", parallel),
        adaptive=_run_schedule(base, adaptive, base.rounds, alpha, seeds,
                               f"log-{adaptive.k_init}-{adaptive.k_alpha:g}",
                               parallel),
    )
