"""Trajectory audits: the state invariants the analysis relies on.

Each audit scans a full-history `TrainingResult` and reports the worst
observed violation as a single number (≤ 0 means the invariant held
everywhere). The bounds are computed with exactly the float expressions
the optimizer itself uses, so a clean trajectory passes bitwise — no
tolerance slack is needed or applied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import DomainError
from .federation import TrainingResult


@dataclass
class AuditFinding:
    """Outcome of one invariant scan.

    ``worst`` is the largest violation found (positive = broken);
    ``limit`` is the allowed maximum, zero for exact invariants.
    """

    name: str
    worst: float
    limit: float = 0.0
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.worst <= self.limit

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return (f"[{status}] {self.name}: worst violation {self.worst:.3e} "
                f"(limit {self.limit:.3e}){extra}")


def _require_history(result: TrainingResult) -> None:
    if result.history is None:
        raise DomainError("audits need a run recorded with full history")


def audit_v_hat_monotone(result: TrainingResult) -> AuditFinding:
    """v̂ never decreases: along each client's round, and — under full
    participation — from one server state to the next."""
    _require_history(result)
    worst = 0.0
    for rh in result.history:
        for cid, records in rh.steps.items():
            prev = rh.broadcast_v_hat
            for rec in records:
                worst = max(worst, float(np.max(prev - rec.v_hat_after)))
                prev = rec.v_hat_after
    if result.config.full_participation:
        eps2 = result.config.hp.epsilon * result.config.hp.epsilon
        prev = np.full(result.x0.shape[0], eps2)
        for rh in result.history:
            worst = max(worst, float(np.max(prev - rh.server_after.v_hat)))
            prev = rh.server_after.v_hat
    return AuditFinding(name="v_hat nondecreasing", worst=worst)


def audit_v_hat_range(result: TrainingResult, g_inf: float) -> AuditFinding:
    """ε² ≤ v̂[j] ≤ G∞² at every recorded state (clipped runs)."""
    _require_history(result)
    eps2 = result.config.hp.epsilon * result.config.hp.epsilon
    cap = g_inf * g_inf
    worst = 0.0
    for rh in result.history:
        for records in rh.steps.values():
            for rec in records:
                worst = max(worst, float(np.max(eps2 - rec.v_hat_after)))
                worst = max(worst, float(np.max(rec.v_hat_after - cap)))
        sv = rh.server_after.v_hat
        worst = max(worst, float(np.max(eps2 - sv)), float(np.max(sv - cap)))
    return AuditFinding(name="v_hat within [eps^2, G_inf^2]", worst=worst)


def audit_momentum_bound(result: TrainingResult, g_inf: float) -> AuditFinding:
    """‖m‖∞ ≤ G∞ at every recorded state (clipped runs)."""
    _require_history(result)
    worst = -math.inf
    for rh in result.history:
        for records in rh.steps.values():
            for rec in records:
                worst = max(worst, float(np.max(np.abs(rec.m_after))) - g_inf)
        worst = max(worst, float(np.max(np.abs(rh.server_after.m))) - g_inf)
    return AuditFinding(name="momentum inf-norm <= G_inf", worst=worst)


def audit_eta_range(result: TrainingResult, g_inf: float) -> AuditFinding:
    """1/G∞ ≤ η[j] ≤ 1/ε for the per-coordinate scaling at every state."""
    _require_history(result)
    lo = 1.0 / g_inf
    hi = 1.0 / result.config.hp.epsilon
    worst = -math.inf
    for rh in result.history:
        for records in rh.steps.values():
            for rec in records:
                eta = 1.0 / np.sqrt(rec.v_hat_after)
                worst = max(worst, float(np.max(eta - hi)),
                            float(np.max(lo - eta)))
    return AuditFinding(name="eta within [1/G_inf, 1/eps]", worst=worst)


def clip_bound(result: TrainingResult) -> Optional[float]:
    """The G∞ actually enforced on this run's gradients, if any."""
    hp_clip = result.config.hp.g_inf_clip
    obj_clip = result.config.objective.clip
    bounds = [b for b in (hp_clip, obj_clip) if b is not None]
    return min(bounds) if bounds else None


def run_audits(result: TrainingResult) -> List[AuditFinding]:
    """All applicable invariant scans for this trajectory."""
    findings = [audit_v_hat_monotone(result)]
    g_inf = clip_bound(result)
    if g_inf is not None:
        findings.append(audit_v_hat_range(result, g_inf))
        findings.append(audit_momentum_bound(result, g_inf))
        findings.append(audit_eta_range(result, g_inf))
    return findings
