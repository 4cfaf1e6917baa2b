#!/usr/bin/env python3
"""
Tests for the invariant suite behind `gdd validate`
Only the deterministic and inexpensive checks run here; the Monte Carlo
checks are covered at reduced budgets in test_montecarlo.
"""

import unittest
from unittest.mock import patch

import numpy as np

from gddperf.exceptions import NumericalError
from gddperf.validation import ValidationSuite, random_hpd, relative_gap
from tests.test_utils import GddTestCase, baseline_models

FAST_CHECKS = [
    'model.snr_round_trip',
    'model.default_signal_model',
    'model.noise_factor',
    'matrix_core.solve_accuracy',
    'matrix_core.projector_identities',
    'matrix_core.star_gram_identity',
    'detectors.batch_matches_single',
    'detectors.scale_invariance',
    'analytic.hand_values',
    'analytic.cdf_monotone',
    'analytic.pd_null_equals_pfa',
    'analytic.pfa_closed_form',
    'analytic.quadrature_convergence',
    'analytic.threshold_round_trip',
    'montecarlo.ordering',
]


class TestValidationSuite(GddTestCase):

    def setUp(self):
        super().setUp()
        s, m, n = baseline_models(trials_pd=500, trials_calibration=10000, pfa_target=1e-3)
        self.suite = ValidationSuite(s, m, n, null_samples=500, chunk_size=500)

    def test_check_names_are_unique(self):
        names = [name for name, _ in self.suite.checks()]
        self.assertEqual(len(names), len(set(names)))
        self.assertTrue(set(FAST_CHECKS) <= set(names))

    def test_fast_checks_pass(self):
        results = self.suite.run(only=FAST_CHECKS)
        self.assertEqual([r.name for r in results], [n for n, _ in self.suite.checks() if n in FAST_CHECKS])
        for result in results:
            with self.subTest(check=result.name):
                self.assertTrue(result.passed, result.detail)
                self.assertGreaterEqual(result.seconds, 0.0)

    def test_errors_become_failures(self):
        with patch.object(ValidationSuite, 'check_noise_factor',
                          side_effect=NumericalError("bad factor", context="model")):
            results = self.suite.run(only=['model.noise_factor'])
        self.assertEqual(len(results), 1)
        self.assertFalse(results[0].passed)
        self.assertIn("NumericalError", results[0].detail)

    def test_unknown_selection_runs_nothing(self):
        self.assertEqual(self.suite.run(only=['no.such_check']), [])


class TestCfarThresholds(GddTestCase):

    def test_white_and_colored_bands_overlap(self):
        s, m, n = baseline_models(trials_calibration=4000, pfa_target=0.01)
        suite = ValidationSuite(s, m, n, null_samples=500, chunk_size=1000)
        results = suite.run(only=['montecarlo.cfar_thresholds'])
        self.assertEqual(len(results), 1)
        self.assertTrue(results[0].passed, results[0].detail)


class TestHelpers(GddTestCase):

    def test_random_hpd_condition(self):
        M = random_hpd(self.rng, 8, 1e4)
        eigenvalues = np.linalg.eigvalsh(M)
        self.assertAlmostEqual(eigenvalues[-1] / eigenvalues[0], 1e4, delta=1.0)

    def test_relative_gap(self):
        self.assertEqual(relative_gap([1.0, 0.0], [1.0, 0.0]), 0.0)
        self.assertAlmostEqual(relative_gap([1.0], [1.1]), 0.1 / 1.1)


if __name__ == '__main__':
    unittest.main()
