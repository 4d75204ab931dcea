"""Aggregation rule and age bookkeeping tests."""

import numpy as np
import pytest

from asyncfed import (AgeTracker, age_weights, aggregate_async, aggregate_sync,
                      fedasync_step)


class TestAgeTracker:
    def test_refresh_history_example(self):
        # refreshed after rounds 2, 3 and 4 is skipped, so at round 5 the
        # device's model version dates from round 3 and its age is 2
        tracker = AgeTracker(3)
        tracker.record_broadcast([0], 2)
        assert tracker.anchor_version(0) == 3
        assert tracker.ages(5)[0] == 2

    def test_just_refreshed_age_zero(self):
        tracker = AgeTracker(2)
        tracker.record_broadcast([1], 6)
        assert tracker.ages(7)[1] == 0

    def test_initial_broadcast_counts(self):
        tracker = AgeTracker(4)
        assert np.all(tracker.ages(1) == 0)

    def test_round_before_refresh_rejected(self):
        tracker = AgeTracker(1)
        tracker.record_broadcast([0], 5)
        with pytest.raises(ValueError):
            tracker.ages(3)


class TestAgeWeights:
    def test_decay_one_is_data_proportional(self):
        w = age_weights([10, 30], [3, 1], 1.0)
        assert w == pytest.approx([0.25, 0.75])

    def test_reference_case(self):
        w = age_weights([5, 5], [0, 2], 0.5)
        assert w == pytest.approx([0.8, 0.2])

    def test_equal_ages_cancel_decay(self):
        for decay in (0.25, 1.0, 3.0):
            w = age_weights([1, 2, 3], [4, 4, 4], decay)
            assert w == pytest.approx([1 / 6, 2 / 6, 3 / 6])

    def test_common_age_offset_cancels(self):
        ages = np.array([0, 2, 5])
        a = age_weights([1, 1, 1], ages, 0.5)
        b = age_weights([1, 1, 1], ages + 7, 0.5)
        assert a == pytest.approx(b.tolist(), abs=1e-15)

    def test_normalization(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 9))
            w = age_weights(rng.integers(1, 50, size=n),
                            rng.integers(0, 6, size=n),
                            float(rng.uniform(0.2, 3.0)))
            assert abs(w.sum() - 1.0) < 1e-12

    def test_nonpositive_decay_rejected(self):
        with pytest.raises(ValueError):
            age_weights([1], [0], 0.0)


class TestAggregateAsync:
    def test_reference_case(self):
        out = aggregate_async(bases=[[1.0, 1.0], [2.0, 2.0]],
                              updates=[[0.0, 0.0], [0.0, 0.0]],
                              weights=[0.8, 0.2])
        assert out == pytest.approx([1.2, 1.2])

    def test_single_device(self):
        out = aggregate_async([[3.0]], [[0.5]], [1.0])
        assert out == pytest.approx([3.5])

    def test_fixed_point(self):
        theta = np.array([1.0, -2.0])
        out = aggregate_async([theta, theta], np.zeros((2, 2)), [0.3, 0.7])
        assert out == pytest.approx(theta.tolist())

    def test_unnormalized_weights_rejected(self):
        with pytest.raises(ValueError):
            aggregate_async([[1.0]], [[0.0]], [0.5])

    def test_matches_sync_when_everyone_fresh(self):
        rng = np.random.default_rng(1)
        theta = rng.normal(size=4)
        updates = rng.normal(size=(3, 4))
        sizes = np.array([2, 5, 3])
        sync = aggregate_sync(theta, updates, sizes)
        weights = age_weights(sizes, np.zeros(3), 1.0)
        asynchronous = aggregate_async(np.tile(theta, (3, 1)), updates, weights)
        assert np.allclose(sync, asynchronous, rtol=1e-12, atol=1e-14)


class TestAggregateSync:
    def test_equal_average(self):
        out = aggregate_sync([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], [7, 7])
        assert out == pytest.approx([0.5, 0.5])

    def test_zero_updates_keep_model(self):
        theta = np.array([4.0, 2.0])
        assert aggregate_sync(theta, np.zeros((3, 2)), [1, 2, 3]) == \
            pytest.approx(theta.tolist())

    def test_single_device(self):
        assert aggregate_sync([1.0], [[2.0]], [5]) == pytest.approx([3.0])


class TestFedasyncStep:
    def test_full_replacement(self):
        assert fedasync_step([1.0, 2.0], [5.0, 6.0], 1.0) == pytest.approx([5.0, 6.0])

    def test_reference_mixing(self):
        assert fedasync_step([1.0], [0.0], 0.4) == pytest.approx([0.6])

    def test_fixed_point(self):
        theta = np.array([2.0, -1.0])
        for mix in (0.2, 0.8, 1.0):
            assert fedasync_step(theta, theta, mix) == pytest.approx(theta.tolist())

    def test_mix_range(self):
        with pytest.raises(ValueError):
            fedasync_step([1.0], [0.0], 0.0)
        with pytest.raises(ValueError):
            fedasync_step([1.0], [0.0], 1.5)
