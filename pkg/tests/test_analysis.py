"""Convergence-theory verification tests."""

import json
import math

import numpy as np
import pytest

from asyncfed import (ConvergenceConstants, bound_trace_experiment,
                      check_descent_contraction, check_quantizer_unbiased,
                      check_smoothness_gap, check_update_variance,
                      derive_constants, estimate_min_retained,
                      fit_second_moment, kappa_threshold, optimality_gap_bound,
                      random_quadratic_task, rng_stream, run_verification,
                      transient_term)


def reference_constants(**overrides):
    # d=2, r_min=2, L=mu=1, slope 1, 2 levels: amplification 4(1+2/16)=4.5;
    # beta 3 puts the threshold at max(81/4, 11, 1) = 20.25
    values = dict(
        smoothness=1.0, strong_convexity=1.0, dim=2, levels=2, min_retained=2,
        second_moment_offset=0.0, second_moment_slope=1.0,
        age_diversity_bound=2, optima_gap_bound=0.0, loss_gap_bound=0.0,
        lr_beta=3.0, lr_kappa=30.0,
    )
    values.update(overrides)
    return ConvergenceConstants(**values)


class TestConstants:
    def test_kappa_threshold_reference(self):
        value = kappa_threshold(smoothness=1.0, strong_convexity=1.0, dim=2,
                                slope=1.0, amplification=4.5, beta=3.0,
                                min_retained=2)
        assert value == pytest.approx(20.25)

    def test_amplification_reference(self):
        const = reference_constants()
        assert const.variance_amplification == pytest.approx(4.5)

    def test_age_bound_from_period_ratio(self):
        task = random_quadratic_task(np.random.default_rng(0), 4, 4,
                                     (0.5, 2.0), 1.0)
        const = derive_constants(task, levels=4, period_ratio=4.0,
                                 min_retained=4, batch_size=None)
        assert const.age_diversity_bound == 5

    def test_initial_rate_within_quarter_smoothness(self):
        task = random_quadratic_task(np.random.default_rng(1), 4, 6,
                                     (0.5, 2.0), 1.0)
        const = derive_constants(task, levels=4, period_ratio=2.0,
                                 min_retained=3, batch_size=None)
        assert const.learning_rate(1) <= 1 / (4 * const.smoothness) + 1e-12

    def test_literal_threshold_kappa_is_degenerate(self):
        # at the exact threshold the transient denominator vanishes
        const = reference_constants(lr_kappa=20.25)
        with pytest.raises(ValueError, match="transient"):
            transient_term(const)

    def test_zero_retained_infeasible(self):
        task = random_quadratic_task(np.random.default_rng(2), 2, 4,
                                     (1.0, 1.0), 1.0)
        with pytest.raises(ValueError, match="min retained|min_retained"):
            derive_constants(task, levels=4, period_ratio=1.0, min_retained=0,
                             batch_size=None)

    def test_full_batch_second_moment(self):
        task = random_quadratic_task(np.random.default_rng(3), 3, 4,
                                     (0.5, 2.0), 1.0, shard_size=5)
        assert fit_second_moment(task, [np.zeros(4)], None,
                                 np.random.default_rng(0)) == (0.0, 1.0)

    def test_stochastic_second_moment_envelopes_samples(self):
        rng = np.random.default_rng(4)
        task = random_quadratic_task(rng, 3, 4, (0.5, 2.0), 1.0,
                                     shard_size=12, scale_jitter=0.6)
        thetas = [rng.normal(0.0, 2.0, size=4) for _ in range(10)]
        offset, slope = fit_second_moment(task, thetas, 3, rng, draws=300)
        assert slope >= 1.0
        probe = rng_stream(9, "probe")
        for theta in thetas:
            for k in range(3):
                exact = task.local_gradient(k, theta)
                second = np.mean([
                    float(np.sum(task.local_gradient(k, theta,
                          probe.choice(12, size=3, replace=False)) ** 2))
                    for _ in range(300)])
                assert second <= offset + slope * float(exact @ exact) + 0.15 * second

    def test_min_retained_unit_gain(self):
        rng = np.random.default_rng(5)
        # 8 equal links, 256 symbols, deterministic capacity 4.389 b/symbol
        got = estimate_min_retained(8, 4, 13.0, 256, 8, rng, fading="none")
        assert got == 8

    def test_min_retained_starved_budget(self):
        rng = np.random.default_rng(6)
        assert estimate_min_retained(16, 4, 13.0, 8, 8, rng, fading="none") == 0


class TestGapBound:
    def test_homogeneous_closed_form(self):
        const = reference_constants()
        initial = 1.7
        for t in (1, 10, 500):
            expect = (const.smoothness * const.age_diversity_bound / 2
                      * (const.lr_kappa + 1) * initial
                      / (t + const.lr_kappa + 1))
            assert optimality_gap_bound(t, const, initial) == \
                pytest.approx(expect, rel=1e-12)

    def test_asymptotic_floor(self):
        const = reference_constants(optima_gap_bound=0.4, loss_gap_bound=0.1,
                                    lr_kappa=3000.0)
        floor = (const.smoothness * const.age_diversity_bound / 2
                 * const.lr_beta * const.heterogeneity_term)
        assert optimality_gap_bound(10 ** 12, const, 5.0) == \
            pytest.approx(floor, rel=1e-6)

    def test_monotone_in_round(self):
        const = reference_constants(optima_gap_bound=0.2)
        values = [optimality_gap_bound(t, const, 2.0) for t in range(1, 200)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_monotone_in_age_diversity(self):
        a = reference_constants(age_diversity_bound=2)
        b = reference_constants(age_diversity_bound=5)
        assert optimality_gap_bound(50, b, 2.0) > optimality_gap_bound(50, a, 2.0)

    def test_monotone_in_heterogeneity(self):
        a = reference_constants(optima_gap_bound=0.1)
        b = reference_constants(optima_gap_bound=0.5)
        assert optimality_gap_bound(50, b, 2.0) > optimality_gap_bound(50, a, 2.0)

    def test_transient_shrinks_with_more_retained(self):
        # a larger retained-coordinate floor admits a smaller beta, which
        # shrinks the per-round transient
        task = random_quadratic_task(np.random.default_rng(7), 4, 8,
                                     (0.5, 2.0), 1.0)
        values = []
        for retained in (2, 4, 8):
            const = derive_constants(task, levels=4, period_ratio=2.0,
                                     min_retained=retained, batch_size=None)
            values.append(transient_term(const))
        assert values[0] > values[1] > values[2]


class TestInequalityChecks:
    def setup_method(self):
        rng = rng_stream(21, "task")
        self.task = random_quadratic_task(rng, 8, 8, (0.5, 2.0), 1.0,
                                          shard_size=4)
        self.const = derive_constants(self.task, levels=4, period_ratio=4.0,
                                      min_retained=4, batch_size=None)

    def test_contraction_random_sweep(self):
        rng = rng_stream(22, "sweep")
        for _ in range(1000):
            theta = rng.normal(0.0, 2.0, size=8)
            size = int(rng.integers(1, 9))
            subset = np.sort(rng.choice(8, size=size, replace=False))
            sizes = self.task.shard_sizes[subset].astype(float)
            alpha = float(rng.uniform(1e-6, 1.0)) / (4 * self.const.smoothness)
            retained = int(rng.integers(1, 9))
            res = check_descent_contraction(self.task, theta, alpha, subset,
                                            sizes / sizes.sum(), retained,
                                            self.const)
            assert res.holds

    def test_contraction_at_shared_optimum(self):
        task = random_quadratic_task(np.random.default_rng(1), 1, 4,
                                     (1.0, 1.0), 0.0)
        const = derive_constants(task, levels=4, period_ratio=1.0,
                                 min_retained=4, batch_size=None)
        theta_star, _ = task.global_optimum()
        res = check_descent_contraction(task, theta_star, 1 / 8, [0], [1.0],
                                        4, const)
        assert res.holds and res.lhs == pytest.approx(0.0, abs=1e-18)

    def test_contraction_classic_specialization(self):
        # identical devices, full retention: rhs is the plain contraction
        task = random_quadratic_task(np.random.default_rng(2), 3, 4,
                                     (1.0, 1.0), 0.0, center_offset=2.0)
        const = derive_constants(task, levels=4, period_ratio=1.0,
                                 min_retained=4, batch_size=None)
        theta = np.random.default_rng(3).normal(0.0, 1.0, size=4)
        alpha = 1 / (4 * const.smoothness)
        res = check_descent_contraction(task, theta, alpha, [0, 1, 2],
                                        np.ones(3) / 3, 4, const)
        theta_star, _ = task.global_optimum()
        dist2 = float(np.sum((theta - theta_star) ** 2))
        assert res.rhs == pytest.approx((1 - const.strong_convexity * alpha) * dist2)
        assert res.holds

    def test_alpha_precondition_enforced(self):
        with pytest.raises(ValueError):
            check_descent_contraction(self.task, np.zeros(8), 1.0, [0], [1.0],
                                      4, self.const)

    def test_variance_bound_holds(self):
        rng = rng_stream(23, "var")
        res = check_update_variance(self.task, rng.normal(0.0, 1.0, size=8),
                                    np.arange(8), self.task.data_weights, 4,
                                    self.const, rng, samples=100_000)
        assert res.holds

    def test_variance_with_minibatches(self):
        rng = rng_stream(24, "varmb")
        task = random_quadratic_task(rng, 4, 8, (0.5, 2.0), 1.0,
                                     shard_size=12, scale_jitter=0.6)
        const = derive_constants(task, levels=4, period_ratio=4.0,
                                 min_retained=4, batch_size=3, seed=5)
        res = check_update_variance(task, rng.normal(0.0, 1.0, size=8),
                                    np.arange(4), task.data_weights, 4,
                                    const, rng, batch_size=3, samples=50_000)
        assert res.holds

    def test_variance_vanishes_without_randomness(self):
        rng = rng_stream(25, "novar")
        const = derive_constants(self.task, levels=2 ** 20, period_ratio=4.0,
                                 min_retained=8, batch_size=None)
        res = check_update_variance(self.task, rng.normal(0.0, 1.0, size=8),
                                    np.arange(8), self.task.data_weights, 8,
                                    const, rng, samples=10_000)
        assert res.lhs < 1e-9
        assert res.holds

    def test_variance_shrinks_with_finer_quantizer(self):
        rng = rng_stream(26, "sweepnu")
        estimates = []
        for levels in (1, 2, 4, 8):
            const = derive_constants(self.task, levels=levels, period_ratio=4.0,
                                     min_retained=4, batch_size=None)
            res = check_update_variance(self.task, np.ones(8), np.arange(8),
                                        self.task.data_weights, 4, const,
                                        rng_stream(27, f"nu{levels}"),
                                        samples=50_000)
            estimates.append(res.lhs)
        assert all(a >= b * 0.98 for a, b in zip(estimates, estimates[1:]))

    def test_sample_floor_enforced(self):
        with pytest.raises(ValueError):
            check_update_variance(self.task, np.zeros(8), [0], [1.0], 4,
                                  self.const, rng_stream(0, "x"), samples=100)

    def test_smoothness_gap_sweep(self):
        rng = rng_stream(28, "smooth")
        res = check_smoothness_gap(self.task,
                                   [rng.normal(0.0, 2.0, size=8)
                                    for _ in range(1000)])
        assert res.holds


class TestTraceExperiment:
    def test_small_bound_trace(self):
        rep = bound_trace_experiment(seeds=3, ticks=80, identical=False, seed=1)
        assert rep["violations"] == 0
        assert rep["constants"].min_retained == 8

    def test_homogeneous_case_decays(self):
        rep = bound_trace_experiment(seeds=3, ticks=200, identical=True, seed=1)
        assert rep["violations"] == 0
        assert rep["constants"].heterogeneity_term == 0.0
        assert rep["mean_gaps"][-1] < rep["mean_gaps"][9]


class TestVerificationReport:
    def test_small_report_passes(self):
        rep = run_verification({"trace_seeds": 2, "trace_ticks": 500,
                                "inequality_trials": 100, "variance_samples": 20_000,
                                "unbiased_draws": 20_000, "unbiased_vectors": 8})
        assert rep["pass"], [c for c in rep["checks"] if not c["pass"]]
        names = {c["name"] for c in rep["checks"]}
        assert "gap_decay" in names and "update_variance" in names
        assert rep["trace_constants"]["homogeneous"]["heterogeneity_term"] == 0.0
        json.dumps(rep)  # report is valid JSON end to end

    def test_bias_injection_fails_unbiasedness(self):
        rep = run_verification({"trace_seeds": 2, "trace_ticks": 60,
                                "inequality_trials": 50, "variance_samples": 20_000,
                                "unbiased_draws": 20_000, "unbiased_vectors": 8,
                                "quantizer_bias": 0.05})
        assert not rep["pass"]
        failed = {c["name"] for c in rep["checks"] if not c["pass"]}
        assert "quantizer_unbiased" in failed

    def test_unknown_option_rejected(self):
        with pytest.raises(ValueError, match="nonsense"):
            run_verification({"nonsense": 1})


def test_biased_quantizer_check_fails_directly():
    res = check_quantizer_unbiased(np.random.default_rng(0), n_vectors=5,
                                   draws=20_000, bias=0.05)
    assert not res.holds
