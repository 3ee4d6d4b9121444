import math
import unittest
from concurrent.futures import ThreadPoolExecutor

import pytest

from src.exceptions import ConfigError, EstimationError
from src.models.sdss import stream
from src.services.simulator import SafetyOutcome
from src.services.stats import (ConfidenceInterval, bernoulli_ci, estimate_probability, hoeffding_interval,
                                hoeffding_samples, interval_overlap, overlap_satisfied, zero_interval)


def bernoulli_evaluator(p):
    def evaluate(seed, ordinals):
        return [bool(stream(seed, i, 99).random() < p) for i in ordinals]
    return evaluate


def interval(lo, hi):
    return ConfidenceInterval(lo, hi, 0.95, 0, 0, "bayesian")


class TestBernoulliInterval(unittest.TestCase):
    def test_prior_interval(self):
        result = bernoulli_ci(0, 0, 0.99)
        self.assertAlmostEqual(result.lo, 0.005)
        self.assertAlmostEqual(result.hi, 0.995)

    def test_no_successes(self):
        result = bernoulli_ci(0, 10, 0.95)
        self.assertEqual(result.lo, 0.0)
        # Beta(1, 11) quantile in closed form
        self.assertAlmostEqual(result.hi, 1 - 0.025 ** (1 / 11), places=10)

    def test_all_successes(self):
        result = bernoulli_ci(10, 10, 0.95)
        self.assertEqual(result.hi, 1.0)
        self.assertAlmostEqual(result.lo, 0.025 ** (1 / 11), places=10)

    def test_clopper_pearson(self):
        result = bernoulli_ci(5, 10, 0.95, "clopper-pearson")
        self.assertAlmostEqual(result.lo, 0.187086, places=5)
        self.assertAlmostEqual(result.hi, 0.812914, places=5)

    def test_clopper_pearson_boundaries(self):
        self.assertEqual(bernoulli_ci(10, 10, 0.95, "clopper-pearson").hi, 1.0)
        result = bernoulli_ci(0, 10, 0.95, "clopper-pearson")
        self.assertEqual(result.lo, 0.0)
        self.assertAlmostEqual(result.hi, 1 - 0.025 ** (1 / 10), places=10)

    def test_shrinks_with_samples(self):
        widths = [bernoulli_ci(7 * n // 10, n, 0.99).width for n in (10, 100, 1000)]
        self.assertTrue(widths[0] > widths[1] > widths[2])

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            bernoulli_ci(11, 10, 0.95)
        with self.assertRaises(ConfigError):
            bernoulli_ci(1, 10, 1.0)
        with self.assertRaises(ConfigError):
            bernoulli_ci(1, 10, 0.95, "wald")


class TestHoeffding(unittest.TestCase):
    def test_sample_size(self):
        # ln(2 / 0.01) / (2 * 0.025^2) = 4238.6...
        self.assertEqual(hoeffding_samples(0.05, 0.99), 4239)

    def test_interval(self):
        result = hoeffding_interval(50, 100, 0.1, 0.9)
        self.assertAlmostEqual(result.lo, 0.45)
        self.assertAlmostEqual(result.hi, 0.55)
        self.assertEqual(result.method, "chernoff")

    def test_interval_is_clipped(self):
        result = hoeffding_interval(100, 100, 0.1, 0.9)
        self.assertEqual(result.hi, 1.0)


class TestOverlap(unittest.TestCase):
    def test_overlap_length(self):
        self.assertAlmostEqual(interval_overlap(interval(0.2, 0.6), interval(0.3, 0.9)), 0.3)
        self.assertEqual(interval_overlap(interval(0.1, 0.2), interval(0.5, 0.9)), 0.0)

    def test_satisfied(self):
        self.assertTrue(overlap_satisfied(interval(0.2, 0.6), interval(0.3, 0.9), 0.5))
        self.assertFalse(overlap_satisfied(interval(0.2, 0.6), interval(0.5, 0.9), 0.5))
        self.assertFalse(overlap_satisfied(interval(0.1, 0.2), interval(0.5, 0.9), 0.5))

    def test_degenerate(self):
        zero = zero_interval(0.95)
        self.assertTrue(overlap_satisfied(zero, zero, 0.5))
        self.assertFalse(overlap_satisfied(zero, interval(0.5, 0.9), 0.5))


class TestEstimateProbability(unittest.TestCase):
    def test_stops_at_target_width(self):
        result = estimate_probability(bernoulli_evaluator(0.9), 0.1, 0.95, 10_000, seed=1, chunk_size=25)
        self.assertTrue(result.width_reached)
        self.assertLessEqual(result.interval.width, 0.1)
        self.assertEqual(result.interval.trials % 25, 0)
        self.assertLess(result.interval.trials, 10_000)

    def test_sample_cap(self):
        result = estimate_probability(bernoulli_evaluator(0.5), 0.001, 0.95, 60, seed=1, chunk_size=25)
        self.assertEqual(result.interval.trials, 60)
        self.assertFalse(result.width_reached)
        self.assertGreater(result.interval.width, 0.001)

    def test_always_safe(self):
        result = estimate_probability(lambda seed, ordinals: [True] * len(ordinals), 0.05, 0.99, 5000, seed=0)
        self.assertEqual(result.interval.hi, 1.0)
        self.assertGreaterEqual(result.interval.lo, 1 - 0.05)

    def test_chernoff(self):
        result = estimate_probability(bernoulli_evaluator(0.7), 0.1, 0.9, 10, seed=4, method="chernoff")
        self.assertEqual(result.interval.trials, hoeffding_samples(0.1, 0.9))
        self.assertAlmostEqual(result.interval.width, 0.1)
        self.assertTrue(result.width_reached)

    def test_deterministic(self):
        first = estimate_probability(bernoulli_evaluator(0.6), 0.1, 0.95, 2000, seed=8)
        second = estimate_probability(bernoulli_evaluator(0.6), 0.1, 0.95, 2000, seed=8)
        self.assertEqual(first, second)

    def test_pool_matches_serial_batches(self):
        serial = estimate_probability(bernoulli_evaluator(0.8), 0.1, 0.95, 2000, seed=3, workers=1, chunk_size=20)
        with ThreadPoolExecutor(max_workers=2) as pool:
            pooled = estimate_probability(bernoulli_evaluator(0.8), 0.1, 0.95, 2000, seed=3, workers=2,
                                          chunk_size=10, executor=pool)
        self.assertEqual(serial, pooled)

    def test_counts_divergence_and_breaches(self):
        def evaluate(seed, ordinals):
            return [SafetyOutcome(safe=i % 2 == 0, diverged=i % 4 == 1, tolerance_breach=i % 5 == 0)
                    for i in ordinals]

        result = estimate_probability(evaluate, 0.01, 0.95, 20, seed=0, chunk_size=20)
        self.assertEqual(result.interval.successes, 10)
        self.assertEqual(result.diverged, 5)
        self.assertEqual(result.tolerance_breaches, 4)

    def test_evaluator_failure(self):
        calls = []

        def evaluate(seed, ordinals):
            calls.append(ordinals)
            if len(calls) > 1:
                raise RuntimeError("worker crashed")
            return [True] * len(ordinals)

        with self.assertRaises(EstimationError) as ctx:
            estimate_probability(evaluate, 0.001, 0.95, 100, seed=0, chunk_size=10)
        self.assertEqual(ctx.exception.trials, 10)
        self.assertEqual(ctx.exception.successes, 10)

    def test_invalid_arguments(self):
        with self.assertRaises(ConfigError):
            estimate_probability(bernoulli_evaluator(0.5), 1.5, 0.95, 10, seed=0)
        with self.assertRaises(ConfigError):
            estimate_probability(bernoulli_evaluator(0.5), 0.1, 0.95, 0, seed=0)


def test_coverage_of_bernoulli_intervals():
    covered = 0
    for seed in range(50):
        result = estimate_probability(bernoulli_evaluator(0.7), 0.05, 0.99, 20_000, seed=seed, chunk_size=100)
        covered += result.interval.lo <= 0.7 <= result.interval.hi
    assert covered >= 47


@pytest.mark.parametrize("method", ["bayesian", "clopper-pearson"])
def test_interval_contains_estimate(method):
    for s, n in [(3, 17), (40, 50), (1, 200)]:
        result = bernoulli_ci(s, n, 0.9, method)
        assert result.lo <= s / n <= result.hi
        assert math.isclose(result.midpoint, (result.lo + result.hi) / 2)
