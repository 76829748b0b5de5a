from datetime import date
import numpy as np
import pandas as pd
import pytest
from scipy.stats import entropy
from tests.helpers import WORKING_RATIOS, BaseTestHelpers
from occuload.exceptions import DimensionError, DomainError
from occuload.schemas.config import DayType
from occuload.services.generator import (
    ReferenceSchedule,
    assign_day_types,
    generate_pool,
    level_distance_scores,
    logits_from_scores,
    sample_daily_profile,
    softmax_probs,
)


class TestSamplingMechanics(BaseTestHelpers):
    def test_distance_scores(self, levels):
        np.testing.assert_allclose(level_distance_scores(0.5, levels), [0.5, 1 / 6, 1 / 6, 0.5])
        with pytest.raises(DomainError):
            level_distance_scores(1.2, levels)

    def test_logits_require_positive_tau(self):
        np.testing.assert_allclose(logits_from_scores([0.1, 0.2], 0.1), [-1.0, -2.0])
        with pytest.raises(DomainError):
            logits_from_scores([0.1, 0.2], 0.0)

    def test_softmax_is_a_distribution(self):
        rng = np.random.default_rng(self.seed)
        for _ in range(20):
            probs = softmax_probs(rng.normal(0, 50, 4))
            assert np.all(probs >= 0)
            assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_softmax_is_shift_invariant(self):
        logits = np.array([0.3, -1.0, 2.0, 0.0])
        np.testing.assert_allclose(softmax_probs(logits), softmax_probs(logits + 1000.0))

    def test_entropy_grows_with_tau(self, levels):
        scores = level_distance_scores(0.4, levels)
        entropies = [entropy(softmax_probs(logits_from_scores(scores, tau))) for tau in (0.01, 0.05, 0.2, 1.0, 5.0)]
        assert all(a < b for a, b in zip(entropies, entropies[1:]))

    def test_small_tau_is_one_hot_at_nearest_level(self, levels):
        probs = softmax_probs(logits_from_scores(level_distance_scores(0.7, levels), 1e-4))
        assert probs[2] == pytest.approx(1.0, abs=1e-12)


class TestDailyProfiles(BaseTestHelpers):
    def test_schedule_validation(self):
        with pytest.raises(DimensionError):
            ReferenceSchedule(DayType.working, np.zeros(23), np.ones(23))
        with pytest.raises(DomainError):
            ReferenceSchedule(DayType.working, np.full(24, 1.5), np.ones(24))
        with pytest.raises(DomainError):
            ReferenceSchedule(DayType.working, np.zeros(24), np.zeros(24))

    def test_profile_is_valid(self, levels):
        schedule = self._make_schedules()[DayType.working][0]
        profile = sample_daily_profile(schedule, levels, np.random.default_rng(self.seed))
        assert profile.probs.shape == (24, 4)
        np.testing.assert_allclose(profile.probs.sum(axis=1), 1.0, atol=1e-12)
        assert profile.day_type is DayType.working

    def test_modal_level_matches_nearest_centroid(self, levels):
        schedule = self._make_schedules()[DayType.working][0]
        rng = np.random.default_rng(self.seed)
        counts = np.zeros((24, levels.n_levels))
        for _ in range(1000):
            probs = sample_daily_profile(schedule, levels, rng).probs
            counts[np.arange(24), probs.argmax(axis=1)] += 1

        nearest = np.abs(np.asarray(WORKING_RATIOS)[:, None] - levels.centroids).argmin(axis=1)
        np.testing.assert_array_equal(counts.argmax(axis=1), nearest)

    def test_inactive_hours_favour_zero_level(self, levels):
        schedule = self._make_schedules()[DayType.non_working][0]
        rng = np.random.default_rng(self.seed)
        for _ in range(50):
            assert np.all(sample_daily_profile(schedule, levels, rng).probs[:, 0] > 0.9)


class TestGeneratePool(BaseTestHelpers):
    sizes = {DayType.working: 30, DayType.non_working: 10}

    def test_shapes(self, levels):
        pool = generate_pool(self._make_schedules(), levels, self.sizes, seed=1)
        assert pool.working.shape == (30, 24, 4)
        assert pool.non_working.shape == (10, 24, 4)
        assert pool.size == 40
        assert pool.profile("non_working", 3).day_type is DayType.non_working

    def test_same_seed_is_bit_identical(self, levels):
        a = generate_pool(self._make_schedules(), levels, self.sizes, seed=5)
        b = generate_pool(self._make_schedules(), levels, self.sizes, seed=5)
        assert a.working.tobytes() == b.working.tobytes()
        assert a.non_working.tobytes() == b.non_working.tobytes()

    def test_different_seeds_differ(self, levels):
        a = generate_pool(self._make_schedules(), levels, self.sizes, seed=5)
        b = generate_pool(self._make_schedules(), levels, self.sizes, seed=6)
        assert not np.array_equal(a.working, b.working)

    def test_profiles_do_not_depend_on_pool_size(self, levels):
        small = generate_pool(self._make_schedules(), levels, self.sizes, seed=5)
        large = generate_pool(
            self._make_schedules(), levels, {DayType.working: 60, DayType.non_working: 10}, seed=5
        )
        np.testing.assert_array_equal(small.working[:10], large.working[:10])

    def test_pool_is_read_only(self, levels):
        pool = generate_pool(self._make_schedules(), levels, self.sizes, seed=1)
        with pytest.raises(ValueError):
            pool.working[0, 0, 0] = 1.0

    def test_multiple_schedules_split_evenly(self, levels):
        schedules = self._make_schedules()
        idle = ReferenceSchedule(DayType.working, np.full(24, 0.0), np.full(24, 0.05), name="idle")
        schedules[DayType.working].append(idle)

        pool = generate_pool(schedules, levels, {DayType.working: 31, DayType.non_working: 4}, seed=2)
        # the first schedule takes the remainder; idle profiles sit at the zero level at 10h
        idle_like = pool.working[:, 10, 0] > 0.9
        assert idle_like.sum() == 15
        assert not idle_like[:16].any()

    def test_requires_schedule_and_positive_size(self, levels):
        with pytest.raises(DomainError):
            generate_pool({DayType.working: self._make_schedules()[DayType.working]}, levels, self.sizes, seed=1)
        with pytest.raises(DomainError):
            generate_pool(self._make_schedules(), levels, {DayType.working: 0, DayType.non_working: 1}, seed=1)


class TestDayTypes(BaseTestHelpers):
    def test_weekends_and_holidays(self):
        # 2023-01-02 is a Monday
        stamps = pd.date_range("2023-01-02", periods=7 * 24, freq="h")
        working = assign_day_types(stamps, holidays=[date(2023, 1, 3)])
        per_day = working.reshape(7, 24)[:, 0]
        np.testing.assert_array_equal(per_day, [True, False, True, True, True, False, False])
