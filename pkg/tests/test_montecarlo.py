#!/usr/bin/env python3
"""
Unit tests for the Monte Carlo engine
Statistical checks use fixed seeds and 4σ / KS p > 0.001 acceptance levels
"""

import unittest
from dataclasses import replace
from unittest.mock import patch

import numpy as np
from scipy import stats

from gddperf import analytic
from gddperf.detectors import Detector, ScmMode
from gddperf.exceptions import CalibrationError, ConvergenceError, DomainError, NumericalError
from gddperf.model import NoiseModel, Scenario, default_signal_model
from gddperf.montecarlo import (
    McResult,
    agreement_tolerance,
    binomial_halfwidth,
    calibrate_threshold,
    estimate_pd,
    gen_batch,
    gen_trial,
    minimum_calibration_trials,
    null_statistics,
    order_statistic_threshold,
    simulate_statistics,
    sweep,
    threshold_band,
)
from tests.test_utils import GddTestCase, baseline_models

SIGMAS = 4.0
KS_LEVEL = 1e-3


class TestTrialGeneration(GddTestCase):

    def setUp(self):
        super().setUp()
        self.s, self.m, self.n = baseline_models()

    def test_shapes(self):
        d = gen_trial(self.s, self.m, self.n, 1.0, self.rng)
        self.assertTrue(d.matches(self.s))
        Z, Z_L = gen_batch(self.s, self.m, self.n, 1.0, self.rng, 7)
        self.assertEqual(Z.shape, (7, 12, 6))
        self.assertEqual(Z_L.shape, (7, 12, 11))

    def test_signal_is_added_to_test_data_only(self):
        noise_only = gen_trial(self.s, self.m, self.n, 0.0, np.random.default_rng(9))
        with_signal = gen_trial(self.s, self.m, self.n, 100.0, np.random.default_rng(9))
        self.assertTrue(np.array_equal(noise_only.Z_L, with_signal.Z_L))
        expected = self.m.with_theta(np.sqrt(100.0 / (self.m.row_energy() * self.n.inv_quadratic(self.m.a))))
        self.assertAllClose(with_signal.Z - noise_only.Z, expected.signal_matrix(), atol=1e-12)

    def test_incompatible_models_rejected(self):
        with self.assertRaises(DomainError):
            gen_trial(self.s, self.m, NoiseModel.identity(5), 1.0, self.rng)
        with self.assertRaises(DomainError):
            gen_trial(Scenario.wide(), self.m, self.n, 1.0, self.rng)


class TestSimulation(GddTestCase):

    def setUp(self):
        super().setUp()
        self.s, self.m, self.n = baseline_models()

    def test_same_seed_same_samples(self):
        first = simulate_statistics(self.s, self.m, self.n, 1.0, 600, 42, chunk_size=250)
        second = simulate_statistics(self.s, self.m, self.n, 1.0, 600, 42, chunk_size=250)
        for detector in Detector:
            self.assertEqual(first[detector].shape, (600,))
            self.assertTrue(np.array_equal(first[detector], second[detector]))

    def test_worker_count_does_not_change_samples(self):
        serial = simulate_statistics(self.s, self.m, self.n, 1.0, 600, 42, chunk_size=100)
        parallel = simulate_statistics(self.s, self.m, self.n, 1.0, 600, 42, chunk_size=100, workers=2)
        for detector in Detector:
            self.assertTrue(np.array_equal(serial[detector], parallel[detector]))

    def test_streams_are_independent(self):
        first = simulate_statistics(self.s, self.m, self.n, 0.0, 100, 42, stream=(1, 0))
        second = simulate_statistics(self.s, self.m, self.n, 0.0, 100, 42, stream=(1, 1))
        self.assertFalse(np.array_equal(first[Detector.GLRGDD], second[Detector.GLRGDD]))

    def test_detector_subset(self):
        samples = simulate_statistics(self.s, self.m, self.n, 0.0, 50, 1, detectors=('amgdd',))
        self.assertEqual(list(samples), [Detector.AMGDD])

    def test_invalid_budget(self):
        with self.assertRaises(DomainError):
            simulate_statistics(self.s, self.m, self.n, 0.0, 0, 1)
        with self.assertRaises(DomainError):
            simulate_statistics(self.s, self.m, self.n, 0.0, 10, 1, chunk_size=0)


class TestThresholds(GddTestCase):

    def test_order_statistic(self):
        samples = np.arange(1.0, 1001.0)
        self.rng.shuffle(samples)
        self.assertEqual(order_statistic_threshold(samples, 0.01), 990.0)
        self.assertEqual(order_statistic_threshold(np.arange(1.0, 101.0), 0.1), 90.0)

    def test_band_brackets_estimate(self):
        samples = self.rng.standard_normal(5000)
        lo, hi = threshold_band(samples, 0.01)
        eta = order_statistic_threshold(samples, 0.01)
        self.assertLessEqual(lo, eta)
        self.assertLessEqual(eta, hi)

    def test_minimum_trials(self):
        self.assertEqual(minimum_calibration_trials(1e-3), 10000)
        self.assertEqual(minimum_calibration_trials(0.01), 1000)

    def test_too_few_calibration_trials(self):
        s, m, n = baseline_models()
        with self.assertRaises(CalibrationError):
            calibrate_threshold(s, m, n, Detector.GLRGDD, trials=500)

    def test_empty_sample(self):
        with self.assertRaises(CalibrationError):
            order_statistic_threshold(np.array([]), 0.1)

    def test_empirical_threshold_near_analytic(self):
        s, m, n = baseline_models(pfa_target=0.05)
        dist = analytic.DistParams.from_scenario(s)
        for detector in Detector:
            samples = simulate_statistics(s, m, n, 0.0, 4000, s.seed, detectors=(detector,))[detector]
            eta = order_statistic_threshold(samples, s.pfa_target)
            lo, hi = threshold_band(samples, s.pfa_target, SIGMAS)
            eta_theory = analytic.threshold(detector, s.pfa_target, dist)
            self.assertTrue(lo <= eta_theory <= hi, (detector, lo, eta, eta_theory, hi))


class TestAgreementWithTheory(GddTestCase):

    def test_halfwidth(self):
        self.assertAlmostEqual(binomial_halfwidth(0.5, 10000), 0.015)
        self.assertEqual(binomial_halfwidth(0.0, 100), 0.0)
        self.assertAlmostEqual(agreement_tolerance(0.0, 0.0, 100), 0.01)

    def test_mc_result(self):
        result = McResult.from_count(Detector.AMGDD, 0.4, 250, 1000, 7)
        self.assertEqual(result.estimate, 0.25)
        self.assertTrue(result.agrees_with(0.25))
        self.assertFalse(result.agrees_with(0.5))

    def test_null_pfa_reproduced(self):
        s, m, n = baseline_models()
        dist = analytic.DistParams.from_scenario(s)
        samples = simulate_statistics(s, m, n, 0.0, 4000, s.seed)
        for detector in Detector:
            eta = analytic.threshold(detector, 0.05, dist)
            hits = int(np.count_nonzero(samples[detector] > eta))
            result = McResult.from_count(detector, eta, hits, 4000, s.seed)
            self.assertTrue(result.agrees_with(0.05, SIGMAS), (detector, result.estimate))

    def test_null_distribution_matches_analytic_cdf(self):
        s, m, n = baseline_models()
        dist = analytic.DistParams.from_scenario(s)
        samples = null_statistics(s, m, n, 2000)
        for detector in Detector:
            self.assertTrue(np.all(np.diff(samples[detector]) >= 0.0))
            pvalue = stats.kstest(samples[detector],
                                  lambda x, d=detector: analytic.null_cdf(d, x, dist)).pvalue
            self.assertGreater(pvalue, KS_LEVEL, detector)

    def test_null_distribution_does_not_depend_on_covariance(self):
        s, m, colored = baseline_models()
        white = simulate_statistics(s, m, NoiseModel.identity(12), 0.0, 2000, 11)
        other = simulate_statistics(s, m, colored, 0.0, 2000, 12)
        for detector in Detector:
            self.assertGreater(stats.ks_2samp(white[detector], other[detector]).pvalue, KS_LEVEL)

    def test_pd_estimate_matches_theory(self):
        s, m, n = baseline_models(pfa_target=0.01)
        rho = 10.0 ** 1.4
        for detector in Detector:
            p = analytic.DistParams.from_scenario(s, rho)
            eta = analytic.threshold(detector, s.pfa_target, p)
            result = estimate_pd(s, m, n, detector, eta, rho, trials=2000)
            self.assertTrue(result.agrees_with(analytic.pd(detector, eta, p), SIGMAS),
                            (detector, result.estimate))

    def test_random_alpha_gives_same_pd(self):
        s, m, n = baseline_models(pfa_target=0.01)
        rho = 10.0 ** 1.2
        eta = analytic.threshold(Detector.GLRGDD, s.pfa_target, analytic.DistParams.from_scenario(s))
        rotated = default_signal_model(s, seed=99)
        base = estimate_pd(s, m, n, Detector.GLRGDD, eta, rho, trials=2000)
        other = estimate_pd(s, rotated, n, Detector.GLRGDD, eta, rho, trials=2000, stream=(9,))
        self.assertLess(abs(base.estimate - other.estimate),
                        np.hypot(base.ci_halfwidth, other.ci_halfwidth) * SIGMAS / 3.0 + 2.0 / 2000)


class TestSweep(GddTestCase):

    def setUp(self):
        super().setUp()
        self.s, self.m, self.n = baseline_models(pfa_target=0.01, snr_grid_db=(0.0, 10.0, 20.0),
                                             trials_pd=1000, trials_calibration=2000)

    def test_analytic_thresholds(self):
        result = sweep(self.s, self.m, self.n, chunk_size=500)
        self.assertFalse(result.partial)
        self.assertEqual(len(result.points), 2 * 3)
        for point in result.points:
            self.assertEqual(point.trials, 1000)
            self.assertEqual(point.seed, self.s.seed)
            self.assertTrue(point.within_ci(SIGMAS), point)
        glrgdd = [p.pd_theory for p in result.points if p.detector is Detector.GLRGDD]
        self.assertEqual(glrgdd, sorted(glrgdd))

    def test_sweep_is_reproducible(self):
        first = sweep(self.s, self.m, self.n, detectors=(Detector.AMGDD,))
        second = sweep(self.s, self.m, self.n, detectors=(Detector.AMGDD,))
        self.assertEqual(first.points, second.points)

    def test_empirical_thresholds(self):
        result = sweep(self.s, self.m, self.n, detectors=(Detector.GLRGDD,), threshold_source='empirical')
        self.assertEqual(len(result.points), 3)
        eta_theory = analytic.threshold(Detector.GLRGDD, 0.01, analytic.DistParams.from_scenario(self.s))
        self.assertNotEqual(result.thresholds[Detector.GLRGDD], eta_theory)
        self.assertEqual(result.points[0].eta, result.thresholds[Detector.GLRGDD])

    def test_failed_point_is_recorded(self):
        real_pd = analytic.pd

        def flaky(detector, eta, p, **kwargs):
            if detector is Detector.AMGDD and p.rho > 50.0:
                raise NumericalError("quadrature blew up", context="analytic")
            return real_pd(detector, eta, p, **kwargs)

        with patch('gddperf.montecarlo.analytic.pd', side_effect=flaky):
            result = sweep(self.s, self.m, self.n)
        self.assertTrue(result.partial)
        self.assertEqual(len(result.failures), 1)
        self.assertEqual(result.failures[0].snr_db, 20.0)
        self.assertEqual(len(result.points), 5)

    def test_threshold_failure_skips_only_that_detector(self):
        real_threshold = analytic.threshold

        def failing(detector, pfa_target, p, **kwargs):
            if detector is Detector.GLRGDD:
                raise ConvergenceError("could not bracket PFA target", context="analytic")
            return real_threshold(detector, pfa_target, p, **kwargs)

        with patch('gddperf.montecarlo.analytic.threshold', side_effect=failing):
            result = sweep(self.s, self.m, self.n)
        self.assertTrue(result.partial)
        self.assertEqual([(f.snr_db, f.detector) for f in result.failures],
                         [(x, Detector.GLRGDD) for x in self.s.snr_grid_db])
        self.assertNotIn(Detector.GLRGDD, result.thresholds)
        alone = sweep(self.s, self.m, self.n, detectors=(Detector.AMGDD,))
        self.assertEqual(result.points, alone.points)

    def test_raw_mode_runs_with_full_training(self):
        s = replace(self.s, n_training=16, snr_grid_db=(10.0,))
        result = sweep(s, self.m, self.n, detectors=(Detector.AMGDD,), scm_mode=ScmMode.RAW)
        self.assertEqual(len(result.points), 1)


if __name__ == '__main__':
    unittest.main()
