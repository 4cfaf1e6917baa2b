#!/usr/bin/env python3
"""
Unit tests for the GLRGDD and AMGDD statistics
"""

import unittest
from dataclasses import replace

import numpy as np

from gddperf.detectors import (
    Detector,
    DetectorOutput,
    ScmMode,
    amgdd,
    amgdd_unreduced,
    build_workspace,
    evaluate,
    evaluate_batch,
    glrgdd,
    glrgdd_prime,
    glrgdd_unreduced,
    glrgdd_woodbury,
)
from gddperf.exceptions import DomainError, NotPositiveDefiniteError
from gddperf.model import NoiseModel, SignalModel, TrialData
from gddperf.montecarlo import gen_batch, gen_trial
from gddperf.validation import complex_normal
from tests.test_utils import GddTestCase, baseline_models


def relative_error(x, y):
    return abs(x - y) / max(abs(x), abs(y))


class TestGlrgdd(GddTestCase):

    def setUp(self):
        super().setUp()
        self.s, self.m, self.n = baseline_models()

    def test_range_and_transform(self):
        for rho in (0.0, 10.0, 1e3):
            for _ in range(50):
                out = evaluate(gen_trial(self.s, self.m, self.n, rho, self.rng), self.m)
                self.assertGreaterEqual(out.t_glrgdd, 0.0)
                self.assertLess(out.t_glrgdd, 1.0)
                self.assertAlmostEqual(out.t_glrgdd_prime / glrgdd_prime(out.t_glrgdd), 1.0, places=9)

    def test_strong_signal_drives_statistic_to_one(self):
        Z, Z_L = gen_batch(self.s, self.m, self.n, 1e6, self.rng, 50)
        out = evaluate_batch(Z, Z_L, self.m)
        self.assertGreater(float(np.min(out.t_glrgdd)), 0.99)
        self.assertTrue(np.all(out.t_glrgdd < 1.0))

    def test_prime_hand_values(self):
        self.assertEqual(glrgdd_prime(0.0), 0.0)
        self.assertAlmostEqual(glrgdd_prime(0.9), 9.0, places=12)
        self.assertAlmostEqual(glrgdd_prime(0.5), 1.0, places=15)
        self.assertAllClose(glrgdd_prime(np.array([0.2, 0.75])), [0.25, 3.0])

    def test_prime_domain(self):
        for bad in (1.0, -0.1, 1.5, np.nan):
            with self.assertRaises(DomainError):
                glrgdd_prime(bad)

    def test_reduced_matches_woodbury(self):
        white = NoiseModel.identity(self.s.n_channels)
        for _ in range(100):
            d = gen_trial(self.s, self.m, white, 10.0, self.rng)
            self.assertLess(relative_error(glrgdd(d, self.m), glrgdd_woodbury(d, self.m)), 1e-9)

    def test_prime_matches_unreduced_glrt(self):
        s = replace(self.s, n_training=16)
        white = NoiseModel.identity(s.n_channels)
        for _ in range(50):
            d = gen_trial(s, self.m, white, 10.0, self.rng)
            reduced = evaluate(d, self.m).t_glrgdd_prime
            self.assertLess(relative_error(reduced, glrgdd_unreduced(d, self.m)), 1e-9)

    def test_unreduced_needs_full_training(self):
        d = gen_trial(self.s, self.m, self.n, 1.0, self.rng)
        with self.assertRaises(DomainError):
            glrgdd_unreduced(d, self.m)

    def test_scale_invariance(self):
        d = gen_trial(self.s, self.m, self.n, 10.0, self.rng)
        reference = glrgdd(d, self.m)
        for c in (1e-3, 7.5, 1e3):
            scaled = TrialData(c * d.Z, c * d.Z_L)
            self.assertLess(relative_error(glrgdd(scaled, self.m), reference), 1e-9)

    def test_scalar_case(self):
        # O = P = Q = 1: t' = |z|^2 / sum |z_l|^2 and t = t'/(1 + t')
        m = SignalModel(a=np.ones(1), C=np.ones((1, 1)), alpha=np.ones(1))
        z, z_l = 1.5 - 0.5j, np.array([0.3 + 0.4j, -1.0 + 0.2j, 0.7j])
        d = TrialData(np.array([[z]]), z_l[None, :])
        ratio = abs(z) ** 2 / np.sum(np.abs(z_l) ** 2)
        out = evaluate(d, m)
        self.assertAlmostEqual(out.t_glrgdd_prime, ratio, places=12)
        self.assertAlmostEqual(out.t_glrgdd, ratio / (1.0 + ratio), places=12)
        self.assertAlmostEqual(amgdd(d, m, ScmMode.RAW), ratio, places=12)


class TestAmgdd(GddTestCase):

    def setUp(self):
        super().setUp()
        self.s, self.m, self.n = baseline_models()

    def test_augmented_matches_projector_form(self):
        white = NoiseModel.identity(self.s.n_channels)
        for _ in range(100):
            d = gen_trial(self.s, self.m, white, 10.0, self.rng)
            self.assertLess(relative_error(amgdd(d, self.m), amgdd_unreduced(d, self.m)), 1e-9)

    def test_raw_matches_projector_form(self):
        s = replace(self.s, n_training=16)
        for _ in range(50):
            d = gen_trial(s, self.m, self.n, 10.0, self.rng)
            self.assertLess(relative_error(amgdd(d, self.m, ScmMode.RAW),
                                           amgdd_unreduced(d, self.m, ScmMode.RAW)), 1e-9)

    def test_raw_needs_full_training(self):
        d = gen_trial(self.s, self.m, self.n, 1.0, self.rng)
        with self.assertRaises(DomainError):
            amgdd(d, self.m, ScmMode.RAW)
        Z, Z_L = gen_batch(self.s, self.m, self.n, 1.0, self.rng, 3)
        with self.assertRaises(DomainError):
            evaluate_batch(Z, Z_L, self.m, ScmMode.RAW)

    def test_nonnegative(self):
        Z, Z_L = gen_batch(self.s, self.m, self.n, 0.0, self.rng, 200)
        self.assertTrue(np.all(evaluate_batch(Z, Z_L, self.m).t_amgdd >= 0.0))


class TestWorkspaceAndBatch(GddTestCase):

    def setUp(self):
        super().setUp()
        self.s, self.m, self.n = baseline_models()

    def test_workspace_shapes(self):
        d = gen_trial(self.s, self.m, self.n, 1.0, self.rng)
        ws = build_workspace(d, self.m)
        self.assertEqual(ws.S.shape, (12, 12))
        self.assertEqual(ws.Z_star.shape, (12, 3))
        self.assertAllClose(ws.Z_star @ ws.Z_star.conj().T,
                            d.Z @ self.m.row_projector @ d.Z.conj().T, atol=1e-10)

    def test_batch_matches_single(self):
        s = replace(self.s, n_training=16)
        Z, Z_L = gen_batch(s, self.m, self.n, 10.0, self.rng, 20)
        for mode in ScmMode:
            batch = evaluate_batch(Z, Z_L, self.m, mode)
            self.assertEqual(len(batch), 20)
            for i in range(20):
                single = evaluate(TrialData(Z[i], Z_L[i]), self.m, mode)
                self.assertAlmostEqual(batch.t_glrgdd[i] / single.t_glrgdd, 1.0, places=10)
                self.assertAlmostEqual(batch.t_amgdd[i] / single.t_amgdd, 1.0, places=10)

    def test_statistic_selects_thresholded_value(self):
        out = DetectorOutput(t_glrgdd=0.5, t_glrgdd_prime=1.0, t_amgdd=0.25)
        self.assertEqual(out.statistic(Detector.GLRGDD), 1.0)
        self.assertEqual(out.statistic('amgdd'), 0.25)

    def test_shape_mismatch_rejected(self):
        d = TrialData(complex_normal(self.rng, 12, 5), complex_normal(self.rng, 12, 11))
        with self.assertRaises(DomainError):
            evaluate(d, self.m)

    def test_singular_augmented_matrix(self):
        m = SignalModel(a=np.ones(2), C=np.ones((1, 1)), alpha=np.ones(1))
        d = TrialData(np.ones((2, 1)), np.ones((2, 2)))
        with self.assertRaises(NotPositiveDefiniteError):
            evaluate(d, m)


if __name__ == '__main__':
    unittest.main()
