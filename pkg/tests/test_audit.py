"""Invariant audits over recorded trajectories, plus seeded stream layout."""

import numpy as np
import pytest

from localams import (
    AggregationMode,
    AuditFinding,
    DomainError,
    FixedInterval,
    HyperParams,
    ObjectiveSpec,
    RunConfig,
    VhatAggregation,
    run_audits,
    run_training,
)
from localams.audit import audit_v_hat_monotone, clip_bound
from localams.rng import client_stream, data_stream, selection_stream, stream


def clipped_config(**overrides):
    base = dict(
        n_clients=3,
        rounds=4,
        hp=HyperParams(
            alpha=0.01, beta1=0.9, beta2=0.99, epsilon=0.1, g_inf_clip=1.0
        ),
        schedule=FixedInterval(k=3),
        objective=ObjectiveSpec(kind="het_quadratic", dim=4, sigma=0.5, clip=1.0),
        seed=31,
    )
    base.update(overrides)
    return RunConfig(**base)


class TestAuditFinding:
    def test_pass_line_format(self):
        line = AuditFinding(name="demo", worst=0.0).line()
        assert line == "[PASS] demo: worst violation 0.000e+00 (limit 0.000e+00)"

    def test_fail_when_above_limit(self):
        finding = AuditFinding(name="demo", worst=1e-3, limit=1e-6)
        assert not finding.ok
        assert finding.line().startswith("[FAIL] demo")


class TestRunAudits:
    def test_clean_clipped_run_passes_all_with_zero_slack(self):
        result = run_training(clipped_config(), record_history=True)
        findings = run_audits(result)
        names = [f.name for f in findings]
        assert names == [
            "v_hat nondecreasing",
            "v_hat within [eps^2, G_inf^2]",
            "momentum inf-norm <= G_inf",
            "eta within [1/G_inf, 1/eps]",
        ]
        for f in findings:
            assert f.ok, f.line()
            assert f.limit == 0.0

    def test_unclipped_run_only_checks_monotonicity(self):
        cfg = clipped_config(
            hp=HyperParams(alpha=0.01, beta1=0.9, beta2=0.99, epsilon=0.1),
            objective=ObjectiveSpec(kind="het_quadratic", dim=4, sigma=0.5),
        )
        result = run_training(cfg, record_history=True)
        assert clip_bound(result) is None
        findings = run_audits(result)
        assert [f.name for f in findings] == ["v_hat nondecreasing"]
        assert findings[0].ok

    def test_partial_participation_and_max_aggregation_still_pass(self):
        cfg = clipped_config(
            n_clients=5,
            participants_per_round=2,
            mode=AggregationMode(variant=VhatAggregation.MAX),
        )
        result = run_training(cfg, record_history=True)
        for f in run_audits(result):
            assert f.ok, f.line()

    def test_corrupted_v_hat_is_caught(self):
        result = run_training(clipped_config(), record_history=True)
        rh = result.history[-1]
        cid = sorted(rh.steps)[0]
        rh.steps[cid][-1].v_hat_after[0] *= 0.5
        finding = audit_v_hat_monotone(result)
        assert not finding.ok
        assert finding.worst > 0.0

    def test_audits_need_history(self):
        result = run_training(clipped_config())
        with pytest.raises(DomainError):
            run_audits(result)

    def test_effective_clip_is_the_tighter_bound(self):
        cfg = clipped_config(
            hp=HyperParams(
                alpha=0.01, beta1=0.9, beta2=0.99, epsilon=0.1, g_inf_clip=2.0
            ),
            objective=ObjectiveSpec(
                kind="het_quadratic", dim=4, sigma=0.5, clip=0.5
            ),
        )
        result = run_training(cfg, record_history=True)
        assert clip_bound(result) == 0.5


class TestSeededStreams:
    def test_same_path_reproduces(self):
        a = stream(7, 2, 1, 3).standard_normal(4)
        b = stream(7, 2, 1, 3).standard_normal(4)
        assert np.array_equal(a, b)

    def test_distinct_paths_diverge(self):
        draws = {
            "client00": client_stream(7, 0, 0).standard_normal(),
            "client01": client_stream(7, 0, 1).standard_normal(),
            "client10": client_stream(7, 1, 0).standard_normal(),
            "select0": selection_stream(7, 0).standard_normal(),
            "data0": data_stream(7, 0).standard_normal(),
        }
        values = list(draws.values())
        assert len(set(values)) == len(values)

    def test_master_seed_separates_everything(self):
        a = client_stream(1, 0, 0).standard_normal()
        b = client_stream(2, 0, 0).standard_normal()
        assert a != b
