"""Convergence-bound evaluation, Lambert-W complexity, trajectory identity."""

import dataclasses
import math

import numpy as np
import pytest

import reference
from localams import (
    AggregationMode,
    DomainError,
    FixedInterval,
    HyperParams,
    LogAdaptiveInterval,
    ObjectiveSpec,
    RunConfig,
    TheoryInputs,
    VhatAggregation,
    check_z_identity,
    lambert_w0,
    rounds_to_epsilon,
    run_training,
    schedule_iterations,
    step_size_cap,
    theorem1_bound,
    theorem2_bound,
    theory_step_size,
)


def inputs(**overrides):
    base = dict(
        L=1.0, sigma=1.0, G_inf=2.0, epsilon=1.0, d=2, beta1=0.1,
        N=8, K=1, T=1000, alpha=1e-4, f_gap=1.0,
    )
    base.update(overrides)
    return TheoryInputs(**base)


def sqrt_rule_alpha(n, k, t, epsilon, L):
    return min(math.sqrt(n / (k * t)), step_size_cap(epsilon, L))


class TestTheoryInputs:
    def test_epsilon_must_not_exceed_gradient_cap(self):
        with pytest.raises(DomainError):
            inputs(epsilon=3.0, G_inf=2.0)

    def test_beta1_range(self):
        with pytest.raises(DomainError):
            inputs(beta1=1.0)

    def test_alpha_cap_formula(self):
        inp = inputs(L=2.0, epsilon=0.5)
        assert inp.alpha_cap == pytest.approx(3 * 0.5 / (20 * 2.0), rel=1e-15)
        assert step_size_cap(0.5, 2.0) == inp.alpha_cap


class TestTheorem1Bound:
    def test_alpha_at_cap_accepted_slightly_above_rejected(self):
        inp = inputs()
        cap = inp.alpha_cap
        theorem1_bound(dataclasses.replace(inp, alpha=cap))
        with pytest.raises(DomainError) as err:
            theorem1_bound(dataclasses.replace(inp, alpha=cap * 1.000001))
        assert "3" in str(err.value) and "20" in str(err.value)

    def test_terms_sum_exactly_to_total(self):
        out = theorem1_bound(inputs(alpha=1e-3))
        assert out.total == sum(out.terms.values())
        assert set(out.terms) == {"C1", "C2", "C3", "C4"}
        assert all(v >= 0.0 for v in out.terms.values())

    def test_noiseless_zero_gap_decays_with_horizon(self):
        totals = []
        for t in (10**3, 10**5, 10**7, 10**9):
            alpha = sqrt_rule_alpha(8, 1, t, 1.0, 1.0)
            out = theorem1_bound(
                inputs(sigma=0.0, f_gap=0.0, T=t, alpha=alpha)
            )
            totals.append(out.total)
        assert all(b < a for a, b in zip(totals, totals[1:]))
        assert totals[-1] < 1e-6 * totals[0]

    def test_leading_term_scales_as_inverse_sqrt_nkt(self):
        t = 10**6
        small = theorem1_bound(
            inputs(N=8, T=t, alpha=sqrt_rule_alpha(8, 1, t, 1.0, 1.0))
        )
        large = theorem1_bound(
            inputs(N=32, T=t, alpha=sqrt_rule_alpha(32, 1, t, 1.0, 1.0))
        )
        assert large.terms["C1"] / small.terms["C1"] == pytest.approx(0.5, rel=1e-12)

    def test_quadrupling_clients_halves_total_at_long_horizon(self):
        t = int(1e10)
        small = theorem1_bound(
            inputs(N=8, T=t, alpha=sqrt_rule_alpha(8, 1, t, 1.0, 1.0))
        )
        large = theorem1_bound(
            inputs(N=32, T=t, alpha=sqrt_rule_alpha(32, 1, t, 1.0, 1.0))
        )
        ratio = large.total / small.total
        assert 0.45 <= ratio <= 0.55

    def test_c1_matches_direct_recomputation(self):
        inp = inputs(alpha=5e-4)
        out = theorem1_bound(inp)
        noise = 5.0 * inp.L * inp.d * inp.sigma**2 / (4.0 * inp.epsilon**2)
        expected = 2.0 * inp.G_inf * (
            inp.f_gap / (inp.alpha * inp.K * inp.T)
            + noise * inp.alpha / inp.N
        )
        assert out.terms["C1"] == pytest.approx(expected, rel=1e-14)


class TestTheorem2Bound:
    def test_fixed_schedule_matches_theorem1_leading_term(self):
        # The sub-leading groups are structured differently in the two
        # bounds, so agreement is asymptotic: push T far enough that the
        # shared leading term dominates both.
        k, t = 4, 10**14
        inp = inputs(K=k, T=t, alpha=sqrt_rule_alpha(8, k, t, 1.0, 1.0))
        via_t1 = theorem1_bound(inp).total
        via_t2 = theorem2_bound(inp, FixedInterval(k=k))
        assert via_t2 == pytest.approx(via_t1, rel=1e-4)

    def test_closed_form_iteration_totals_match_direct_sums(self):
        from localams import interval

        for k_init, k_alpha in [(1, 1.5), (2, 2.0), (3, 4.0), (5, 10.0)]:
            sched = LogAdaptiveInterval(k_init=k_init, k_alpha=k_alpha)
            for rounds in (1, 2, 3, 7, 64, 65, 100, 999):
                direct = sum(interval(sched, t) for t in range(rounds))
                assert schedule_iterations(sched, rounds) == direct
        assert schedule_iterations(FixedInterval(k=6), 123) == 6 * 123

    def test_decreasing_in_horizon_for_log_schedule(self):
        sched = LogAdaptiveInterval(k_init=3, k_alpha=4.0)
        values = [
            theorem2_bound(inputs(T=t), sched) for t in (100, 1000, 10_000)
        ]
        assert values[0] > values[1] > values[2]

    def test_cross_check_against_independent_summation(self):
        n, t = 8, 100
        sched = LogAdaptiveInterval(k_init=3, k_alpha=4.0)
        total_iters = reference.sum_log_schedule(3, 4, t)
        assert schedule_iterations(sched, t) == total_iters

        inp = inputs(N=n, T=t)
        out = theorem2_bound(inp, sched)
        # Recompute every printed constant from scratch.
        pre = 2.0 * inp.G_inf
        e, G2 = inp.epsilon, inp.G_inf**2
        b1, gap2 = inp.beta1, inp.G_inf**2 - inp.epsilon**2
        k_last = 3 + reference.log_floor_exact(t - 1, 4)
        ratio = n / total_iters
        c1 = pre * (inp.f_gap + 5 * inp.L * inp.d * inp.sigma**2 / (4 * e * e))
        c2 = (
            pre * 2 * inp.L**2 * b1**2 * G2 * inp.d / ((1 - b1) ** 2 * e**4)
            + pre * inp.L**2 * G2 / e**4 * k_last**2
            + pre * inp.L**2 * G2 / e**4 * 4 * (1 - b1) ** 2 * inp.d * k_last**4
        )
        c3 = (
            pre * (2 - b1) * G2 * inp.d * gap2 / ((1 - b1) * e**3) * k_last
            + pre * 3 * inp.d * gap2 * G2 / (2 * e**3 * (1 - b1))
        ) / total_iters
        c4 = ratio**1.5 * (
            pre * 5 * inp.L * G2 * inp.d * gap2**2 / (8 * e**6 * (1 - b1) ** 2)
            * (2 * b1**2 + (1 - b1) ** 2)
            + pre * 5 * inp.L * G2 * inp.d**2 * gap2**2 / (2 * e**6) * k_last
        )
        expected = c1 / math.sqrt(n * total_iters) + ratio * c2 + c3 + c4
        assert out == pytest.approx(expected, rel=1e-12)

    def test_step_size_rule(self):
        # Large iteration budgets drive the square-root rule below the cap.
        assert theory_step_size(4, 10**8, 1.0, 1.0) == pytest.approx(
            math.sqrt(4 / 10**8), rel=1e-15
        )
        # Tiny budgets hit the cap instead.
        assert theory_step_size(100, 1, 1.0, 1.0) == step_size_cap(1.0, 1.0)


class TestLambertComplexity:
    def test_defining_identity_at_e(self):
        w = lambert_w0(math.e)
        assert w == pytest.approx(1.0, abs=1e-12)

    def test_round_trip_across_scales(self):
        for x in np.logspace(-6, 9, 20):
            w = lambert_w0(float(x))
            assert w * math.exp(w) == pytest.approx(x, rel=1e-12)

    def test_matches_bisection_oracle(self):
        assert lambert_w0(1e4) == pytest.approx(7.231846038093368, rel=1e-12)
        for x in (0.5, 3.0, 1e2, 1e4, 1e8):
            assert lambert_w0(x) == pytest.approx(
                reference.bisect_lambert_w(x), abs=1e-10
            )

    def test_zero_and_negative_arguments(self):
        assert lambert_w0(0.0) == 0.0
        with pytest.raises(DomainError):
            lambert_w0(-0.1)

    def test_iteration_count_decreasing_in_clients(self):
        eps_target = 0.05
        counts = [rounds_to_epsilon(n, eps_target) for n in (1, 2, 4, 8, 16)]
        assert all(b < a for a, b in zip(counts, counts[1:]))

    def test_iteration_count_formula(self):
        n, eps_target = 4, 0.1
        x = 1.0 / (n * eps_target**2)
        assert rounds_to_epsilon(n, eps_target) == pytest.approx(
            x / lambert_w0(x), rel=1e-14
        )


class TestZIdentity:
    def _result(self, beta1=0.9, sigma=0.5, n_clients=3, record=True, **overrides):
        cfg_kwargs = dict(
            n_clients=n_clients,
            rounds=5,
            hp=HyperParams(alpha=0.01, beta1=beta1, beta2=0.99, epsilon=0.1),
            schedule=FixedInterval(k=4),
            objective=ObjectiveSpec(kind="het_quadratic", dim=5, sigma=sigma),
            seed=17,
        )
        cfg_kwargs.update(overrides)
        return run_training(RunConfig(**cfg_kwargs), record_history=record)

    def test_momentum_trajectory_residual(self):
        assert check_z_identity(self._result()) <= 1e-8

    def test_momentum_free_degeneration(self):
        assert check_z_identity(self._result(beta1=0.0)) <= 1e-12

    def test_single_client_exact(self):
        assert check_z_identity(self._result(n_clients=1)) <= 1e-10

    def test_requires_recorded_history(self):
        with pytest.raises(DomainError):
            check_z_identity(self._result(record=False))

    def test_requires_full_participation(self):
        result = self._result(n_clients=4, participants_per_round=2)
        with pytest.raises(DomainError):
            check_z_identity(result)

    def test_requires_plain_averaging(self):
        for mode in (
            AggregationMode(variant=VhatAggregation.MAX),
            AggregationMode(restart_momentum=True),
        ):
            with pytest.raises(DomainError):
                check_z_identity(self._result(mode=mode))

    def test_requires_constant_learning_rate(self):
        with pytest.raises(DomainError):
            check_z_identity(self._result(lr_decay=0.99))
