#!/usr/bin/env python3
"""
Invariant suite behind `gdd validate`
Each check exercises one property of the models, the linear algebra, the
detectors, the closed-form performance or the Monte Carlo engine and reports
pass/fail with a short detail line.
"""

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np
from scipy import special, stats

from . import analytic
from .detectors import (
    Detector,
    ScmMode,
    amgdd_unreduced,
    evaluate,
    evaluate_batch,
    glrgdd_unreduced,
    glrgdd_woodbury,
)
from .exceptions import GddError
from .matrix_core import (
    gram_inv_sqrt,
    hermitian_part,
    hermitian_solve,
    projector,
    sample_colored_gaussian,
)
from .model import (
    NoiseModel,
    Scenario,
    SignalModel,
    TrialData,
    db_to_linear,
    default_signal_model,
    snr_from_theta,
    snr_to_theta,
)
from .montecarlo import (
    DEFAULT_CHUNK_SIZE,
    binomial_halfwidth,
    calibrate_threshold,
    gen_batch,
    gen_trial,
    simulate_statistics,
    sweep,
    threshold_band,
)
from .report import ReportWriter

logger = logging.getLogger(__name__)

KS_LEVEL = 0.01
VALIDATION_STREAM = 3

CheckOutcome = Tuple[bool, str]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def complex_normal(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_hpd(rng: np.random.Generator, n: int, cond: float = 10.0) -> np.ndarray:
    """Hermitian positive-definite matrix with eigenvalues log-spaced from 1 down to 1/cond"""
    q, _ = np.linalg.qr(complex_normal(rng, n, n))
    eigenvalues = np.logspace(0.0, -math.log10(cond), n)
    return hermitian_part((q * eigenvalues) @ q.conj().T)


def relative_gap(x: np.ndarray, y: np.ndarray) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    scale = np.maximum(np.abs(x), np.abs(y))
    with np.errstate(divide='ignore', invalid='ignore'):
        gaps = np.where(scale > 0, np.abs(x - y) / scale, 0.0)
    return float(np.max(gaps)) if gaps.size else 0.0


class ValidationSuite:
    """Runs the named invariant checks against one scenario"""

    def __init__(self, scenario: Scenario, signal: SignalModel, noise: NoiseModel, *,
                 null_samples: int = 10000, quadrature_order: int = analytic.DEFAULT_QUADRATURE_ORDER,
                 chunk_size: int = DEFAULT_CHUNK_SIZE, workers: int = 1, progress: bool = False):
        self.scenario = scenario
        self.signal = signal
        self.noise = noise
        self.null_samples = null_samples
        self.order = quadrature_order
        self.engine = dict(chunk_size=chunk_size, workers=workers, progress=progress)
        self.dist = analytic.DistParams.from_scenario(scenario)
        self._thresholds = {}

    def checks(self) -> List[Tuple[str, Callable[[], CheckOutcome]]]:
        return [
            ('model.snr_round_trip', self.check_snr_round_trip),
            ('model.default_signal_model', self.check_default_signal_model),
            ('model.noise_factor', self.check_noise_factor),
            ('model.alpha_phase_invariance', self.check_alpha_phase_invariance),
            ('matrix_core.solve_accuracy', self.check_solve_accuracy),
            ('matrix_core.projector_identities', self.check_projector_identities),
            ('matrix_core.star_gram_identity', self.check_star_gram_identity),
            ('matrix_core.colored_sampling', self.check_colored_sampling),
            ('detectors.glrgdd_range', self.check_glrgdd_range),
            ('detectors.glrgdd_dual_forms', self.check_glrgdd_dual_forms),
            ('detectors.amgdd_dual_forms', self.check_amgdd_dual_forms),
            ('detectors.batch_matches_single', self.check_batch_matches_single),
            ('detectors.scale_invariance', self.check_scale_invariance),
            ('detectors.cfar_null_distribution', self.check_cfar_null_distribution),
            ('analytic.hand_values', self.check_hand_values),
            ('analytic.cdf_monotone', self.check_cdf_monotone),
            ('analytic.pd_monotone_in_rho', self.check_pd_monotone_in_rho),
            ('analytic.pd_null_equals_pfa', self.check_pd_null_equals_pfa),
            ('analytic.pfa_closed_form', self.check_pfa_closed_form),
            ('analytic.null_cdf_ks', self.check_null_cdf_ks),
            ('analytic.quadrature_convergence', self.check_quadrature_convergence),
            ('analytic.threshold_round_trip', self.check_threshold_round_trip),
            ('montecarlo.determinism', self.check_determinism),
            ('montecarlo.pfa_reproduction', self.check_pfa_reproduction),
            ('montecarlo.empirical_threshold', self.check_empirical_threshold),
            ('montecarlo.pd_agreement', self.check_pd_agreement),
            ('montecarlo.ordering', self.check_ordering),
            ('montecarlo.cfar_thresholds', self.check_cfar_thresholds),
            ('montecarlo.threshold_band_nesting', self.check_threshold_band_nesting),
        ]

    def run(self, only: Optional[Iterable[str]] = None) -> List[CheckResult]:
        selected = set(only) if only is not None else None
        results = []
        for name, check in self.checks():
            if selected is not None and name not in selected:
                continue
            start = time.perf_counter()
            try:
                passed, detail = check()
            except GddError as e:
                passed, detail = False, f"{type(e).__name__}: {e}"
            elapsed = time.perf_counter() - start
            level = logging.INFO if passed else logging.WARNING
            logger.log(level, f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
            results.append(CheckResult(name, bool(passed), detail, elapsed))
        return results

    # helpers

    def _rng(self, key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.scenario.seed,
                                                            spawn_key=(VALIDATION_STREAM, key)))

    def _threshold(self, detector: Detector) -> float:
        if detector not in self._thresholds:
            self._thresholds[detector] = analytic.threshold(detector, self.scenario.pfa_target,
                                                            self.dist, order=self.order)
        return self._thresholds[detector]

    def _white_scenario(self, extra_training: int = 0) -> Tuple[Scenario, SignalModel, NoiseModel]:
        s = replace(self.scenario, n_training=self.scenario.n_training + extra_training)
        return s, self.signal, NoiseModel.identity(s.n_channels)

    def _cross_rank_scenario(self) -> Tuple[Scenario, SignalModel, NoiseModel]:
        """White-noise geometry with L >= O so the raw SCM is invertible"""
        extra = max(0, self.scenario.n_channels - self.scenario.n_training) + 4
        return self._white_scenario(extra)

    # model

    def check_snr_round_trip(self) -> CheckOutcome:
        rng = self._rng(1)
        worst = 0.0
        for _ in range(20):
            O = int(rng.integers(2, 17))
            P = int(rng.integers(1, 9))
            Q = int(rng.integers(1, P + 1))
            m = SignalModel(a=complex_normal(rng, O), C=complex_normal(rng, Q, P),
                            alpha=complex_normal(rng, Q))
            n = NoiseModel(random_hpd(rng, O, 1e3))
            for rho in (1e-3, 1.0, 31.6, 1e6):
                back = snr_from_theta(snr_to_theta(rho, m, n), m, n)
                worst = max(worst, abs(back - rho) / rho)
        zero = snr_to_theta(0.0, self.signal, self.noise)
        return worst <= 1e-12 and zero == 0, f"worst relative error {worst:.2e}"

    def check_default_signal_model(self) -> CheckOutcome:
        rng = self._rng(2)
        worst = 0.0
        count = 0
        for O in (2, 5, 12, 32):
            for P in (1, 3, 6, 9):
                for Q in range(1, P + 1):
                    s = Scenario(n_channels=O, n_columns=P, subspace_dim=Q,
                                 n_training=max(1, O - P + Q + 1))
                    m = default_signal_model(s, spatial_freq=float(rng.uniform(-0.5, 0.5)))
                    gram_error = np.max(np.abs(m.C @ m.C.conj().T - np.eye(Q)))
                    modulus_error = np.max(np.abs(np.abs(m.a) - 1.0))
                    singular = np.linalg.svd(m.signal_matrix(), compute_uv=False)
                    rank_error = singular[1] / singular[0] if singular.size > 1 else 0.0
                    worst = max(worst, gram_error, modulus_error, rank_error)
                    count += 1
        return worst <= 1e-12, f"{count} scenarios, worst deviation {worst:.2e}"

    def check_noise_factor(self) -> CheckOutcome:
        worst = 0.0
        for O in (2, 12, 32, 64):
            n = NoiseModel.exponential(O)
            worst = max(worst, float(np.max(np.abs(n.factor @ n.factor.conj().T - n.R))))
        return worst <= 1e-12, f"max |GGᴴ - R| = {worst:.2e} for O up to 64"

    def check_alpha_phase_invariance(self) -> CheckOutcome:
        s, detector = self.scenario, Detector.GLRGDD
        snr_db = s.snr_grid_db[len(s.snr_grid_db) // 2]
        rho = db_to_linear(snr_db)
        eta = self._threshold(detector)
        rng = self._rng(3)
        draw = complex_normal(rng, s.subspace_dim)
        variants = {
            'default': self.signal,
            'phase': self.signal.with_alpha(self.signal.alpha * np.exp(0.7j)),
            'random': self.signal.with_alpha(draw / np.linalg.norm(draw)),
        }
        estimates = {}
        for index, (label, m) in enumerate(variants.items()):
            samples = simulate_statistics(s, m, self.noise, rho, s.trials_pd, s.seed,
                                          stream=(VALIDATION_STREAM, 100 + index),
                                          detectors=(detector,), **self.engine)[detector]
            estimates[label] = float(np.mean(samples > eta))
        base = estimates['default']
        ok = True
        for label, value in estimates.items():
            band = math.hypot(binomial_halfwidth(base, s.trials_pd),
                              binomial_halfwidth(value, s.trials_pd)) + 2.0 / s.trials_pd
            ok &= abs(value - base) <= band
        detail = ", ".join(f"{k}={v:.4f}" for k, v in estimates.items())
        return ok, f"PD at {snr_db:g} dB: {detail}"

    # matrix core

    def check_solve_accuracy(self) -> CheckOutcome:
        rng = self._rng(4)
        residual = recovery = oracle = 0.0
        for _ in range(50):
            n = int(rng.integers(2, 33))
            X0 = complex_normal(rng, n, 3)
            M = random_hpd(rng, n, 1e8)
            B = M @ X0
            X = hermitian_solve(M, B)
            residual = max(residual, np.max(np.abs(M @ X - B)) / np.max(np.abs(B)))

            M = random_hpd(rng, n, 1e5)
            X = hermitian_solve(M, M @ X0)
            recovery = max(recovery, np.max(np.abs(X - X0)) / np.max(np.abs(X0)))

            M = random_hpd(rng, n, 1e3)
            B = complex_normal(rng, n, 3)
            expected = np.linalg.inv(M) @ B
            oracle = max(oracle, np.max(np.abs(hermitian_solve(M, B) - expected)) / np.max(np.abs(expected)))
        ok = residual <= 1e-9 and recovery <= 1e-9 and oracle <= 1e-9
        return ok, (f"residual {residual:.1e} (cond 1e8), recovery {recovery:.1e} (cond 1e5), "
                    f"inverse oracle {oracle:.1e}")

    def check_projector_identities(self) -> CheckOutcome:
        rng = self._rng(5)
        worst = 0.0
        trace_error = 0.0
        for _ in range(1000):
            P = int(rng.integers(1, 10))
            Q = int(rng.integers(1, P + 1))
            proj, perp = projector(complex_normal(rng, Q, P))
            worst = max(worst,
                        np.max(np.abs(proj @ proj - proj)),
                        np.max(np.abs(proj - proj.conj().T)),
                        np.max(np.abs(proj @ perp)))
            trace_error = max(trace_error, abs(np.trace(proj).real - Q))
        return worst <= 1e-10 and trace_error <= 1e-10, \
            f"1000 random C, worst identity error {worst:.1e}, trace error {trace_error:.1e}"

    def check_star_gram_identity(self) -> CheckOutcome:
        rng = self._rng(6)
        worst = 0.0
        for _ in range(1000):
            O = int(rng.integers(2, 13))
            P = int(rng.integers(1, 10))
            Q = int(rng.integers(1, P + 1))
            C = complex_normal(rng, Q, P)
            Z = complex_normal(rng, O, P)
            proj, _ = projector(C)
            Z_star = Z @ C.conj().T @ gram_inv_sqrt(C)
            worst = max(worst, float(np.max(np.abs(Z @ proj @ Z.conj().T - Z_star @ Z_star.conj().T))))
        return worst <= 1e-10, f"1000 random (Z, C), max abs error {worst:.1e}"

    def check_colored_sampling(self) -> CheckOutcome:
        rng = self._rng(7)
        blocks, width = 10, 100_000
        empirical = np.zeros_like(self.noise.R)
        for _ in range(blocks):
            block = sample_colored_gaussian(self.noise, width, rng)
            empirical += block @ block.conj().T
        empirical /= blocks * width
        error = float(np.max(np.abs(empirical - self.noise.R)))
        repeat = np.array_equal(sample_colored_gaussian(self.noise, 16, self._rng(8)),
                                sample_colored_gaussian(self.noise, 16, self._rng(8)))
        return error <= 1e-2 and repeat, f"sample covariance error {error:.2e} over {blocks * width} columns"

    # detectors

    def check_glrgdd_range(self) -> CheckOutcome:
        s, m, n = self.scenario, self.signal, self.noise
        low = high = 0.0
        gap = 0.0
        for index, rho in enumerate((0.0, 1e3)):
            rng = self._rng(10 + index)
            Z, Z_L = gen_batch(s, m, n, rho, rng, self.null_samples)
            out = evaluate_batch(Z, Z_L, m)
            low = min(low, float(np.min(out.t_glrgdd)))
            high = max(high, float(np.max(out.t_glrgdd)))
            gap = max(gap, relative_gap(out.t_glrgdd_prime, out.t_glrgdd / (1.0 - out.t_glrgdd)))
        ok = low >= 0.0 and high < 1.0 and gap <= 1e-9
        return ok, f"t in [{low:.3g}, {high:.12g}], t' consistency {gap:.1e}"

    def check_glrgdd_dual_forms(self) -> CheckOutcome:
        s, m, n = self._white_scenario()
        rng = self._rng(12)
        woodbury = 0.0
        for _ in range(1000):
            d = gen_trial(s, m, n, 10.0, rng)
            woodbury = max(woodbury, relative_gap(evaluate(d, m).t_glrgdd, glrgdd_woodbury(d, m)))

        s, m, n = self._cross_rank_scenario()
        unreduced = 0.0
        for _ in range(200):
            d = gen_trial(s, m, n, 10.0, rng)
            unreduced = max(unreduced, relative_gap(evaluate(d, m).t_glrgdd_prime, glrgdd_unreduced(d, m)))
        ok = woodbury <= 1e-9 and unreduced <= 1e-9
        return ok, f"reduced vs Woodbury {woodbury:.1e}, t' vs unreduced GLRT {unreduced:.1e}"

    def check_amgdd_dual_forms(self) -> CheckOutcome:
        s, m, n = self._white_scenario()
        rng = self._rng(13)
        augmented = 0.0
        for _ in range(1000):
            d = gen_trial(s, m, n, 10.0, rng)
            augmented = max(augmented, relative_gap(evaluate(d, m).t_amgdd, amgdd_unreduced(d, m)))

        s, m, n = self._cross_rank_scenario()
        raw = 0.0
        for _ in range(200):
            d = gen_trial(s, m, n, 10.0, rng)
            raw = max(raw, relative_gap(evaluate(d, m, ScmMode.RAW).t_amgdd,
                                        amgdd_unreduced(d, m, ScmMode.RAW)))
        ok = augmented <= 1e-9 and raw <= 1e-9
        return ok, f"augmented SCM {augmented:.1e}, raw SCM {raw:.1e}"

    def check_batch_matches_single(self) -> CheckOutcome:
        s, m, n = self._cross_rank_scenario()
        Z, Z_L = gen_batch(s, m, n, 10.0, self._rng(14), 50)
        gap = 0.0
        for mode in ScmMode:
            batch = evaluate_batch(Z, Z_L, m, mode)
            for i in range(len(batch)):
                single = evaluate(TrialData(Z[i], Z_L[i]), m, mode)
                gap = max(gap,
                          relative_gap(single.t_glrgdd, batch.t_glrgdd[i]),
                          relative_gap(single.t_glrgdd_prime, batch.t_glrgdd_prime[i]),
                          relative_gap(single.t_amgdd, batch.t_amgdd[i]))
        return gap <= 1e-10, f"batched vs per-trial {gap:.1e}"

    def check_scale_invariance(self) -> CheckOutcome:
        s, m, n = self.scenario, self.signal, self.noise
        Z, Z_L = gen_batch(s, m, n, 10.0, self._rng(15), 200)
        reference = evaluate_batch(Z, Z_L, m).t_glrgdd
        gap = 0.0
        for c in (1e-3, 7.5, 1e3):
            gap = max(gap, relative_gap(evaluate_batch(c * Z, c * Z_L, m).t_glrgdd, reference))
        return gap <= 1e-9, f"worst relative change {gap:.1e} for c in (1e-3, 7.5, 1e3)"

    def check_cfar_null_distribution(self) -> CheckOutcome:
        s, m = self.scenario, self.signal
        white = simulate_statistics(s, m, NoiseModel.identity(s.n_channels), 0.0, self.null_samples,
                                    s.seed, stream=(VALIDATION_STREAM, 200), **self.engine)
        colored = simulate_statistics(s, m, self.noise, 0.0, self.null_samples,
                                      s.seed, stream=(VALIDATION_STREAM, 201), **self.engine)
        pvalues = {d: float(stats.ks_2samp(white[d], colored[d]).pvalue) for d in Detector}
        ok = all(p > KS_LEVEL for p in pvalues.values())
        return ok, ", ".join(f"{d.value} KS p={p:.3f}" for d, p in pvalues.items())

    # analytic

    def check_hand_values(self) -> CheckOutcome:
        p = analytic.DistParams(12, 6, 3, 11)
        rule = analytic.QuadratureRule.gauss_legendre(self.order)
        failures = []

        if abs(analytic.pfa_glrgdd(1.0, p) - 0.5) > 1e-12:
            failures.append("pfa_glrgdd(1) != 0.5")
        if abs(analytic.cdf_p1(1.0, 0.0, p) - 0.5) > 1e-12:
            failures.append("cdf_p1(1, 0) != 0.5")
        if abs(analytic.inc_gamma(1, 1.0) - 2.0 / math.e) > 1e-14:
            failures.append("IG_2(1) != 2/e")
        if abs(math.exp(analytic.log_binom(20, 10)) - 184756) > 1e-6:
            failures.append("C(20, 10) != 184756")
        for name, pdf, mode in (('beta_g', analytic.pdf_beta_g, 1.0 / 3.0),
                                ('beta_a', analytic.pdf_beta_a, 3.0 / 13.0)):
            total = rule.integrate(lambda b: pdf(b, p))
            if abs(total - 1.0) > 1e-10:
                failures.append(f"{name} integrates to {total:.12f}")
            if not (pdf(mode, p) >= pdf(mode - 1e-4, p) and pdf(mode, p) >= pdf(mode + 1e-4, p)):
                failures.append(f"{name} mode is not at {mode:.4f}")
        if abs(float(np.sum(rule.weights)) - 1.0) > 1e-14:
            failures.append("quadrature weights do not sum to 1")
        return not failures, "; ".join(failures) or "all hand values reproduced"

    def check_cdf_monotone(self) -> CheckOutcome:
        eta = np.logspace(-3, 4, 60)
        nc = np.array([0.0, 0.1, 1.0, 10.0, 100.0, 1000.0])
        grid = analytic.cdf_p1(eta[None, :], nc[:, None], self.dist)
        along_eta = float(np.min(np.diff(grid, axis=1)))
        along_nc = float(np.max(np.diff(grid, axis=0)))
        ok = along_eta >= -1e-14 and along_nc <= 1e-14
        return ok, f"min step in eta {along_eta:.1e}, max step in noncentrality {along_nc:.1e}"

    def check_pd_monotone_in_rho(self) -> CheckOutcome:
        rhos = np.concatenate([[0.0], np.logspace(-2, 4, 40)])
        worst = {}
        for detector in Detector:
            eta = self._threshold(detector)
            curve = np.array([analytic.pd(detector, eta, self.dist.with_rho(r), order=self.order)
                              for r in rhos])
            worst[detector] = float(np.min(np.diff(curve)))
        ok = all(step >= -1e-12 for step in worst.values())
        return ok, ", ".join(f"{d.value} min step {v:.1e}" for d, v in worst.items())

    def check_pd_null_equals_pfa(self) -> CheckOutcome:
        eta = np.logspace(-2, 3, 25)
        gaps = {d: float(np.max(np.abs(analytic.pd(d, eta, self.dist, order=self.order)
                                       - analytic.pfa(d, eta, self.dist, order=self.order))))
                for d in Detector}
        ok = all(g <= 1e-12 for g in gaps.values())
        return ok, ", ".join(f"{d.value} {g:.1e}" for d, g in gaps.items())

    def check_pfa_closed_form(self) -> CheckOutcome:
        p = self.dist
        eta = np.logspace(-2, 3, 25)
        closed = analytic.pfa_glrgdd(eta, p)
        integral = analytic.pd_glrgdd(eta, p, order=self.order)
        x = eta / (1.0 + eta)
        beta_tail = 1.0 - special.betainc(p.subspace_dim, p.n1 - p.subspace_dim + 1, x)
        quad_gap = float(np.max(np.abs(closed - integral)))
        beta_gap = float(np.max(np.abs(closed - beta_tail)))
        return quad_gap <= 1e-10 and beta_gap <= 1e-12, \
            f"vs quadrature {quad_gap:.1e}, vs regularized Beta tail {beta_gap:.1e}"

    def check_null_cdf_ks(self) -> CheckOutcome:
        s = self.scenario
        samples = simulate_statistics(s, self.signal, self.noise, 0.0, self.null_samples, s.seed,
                                      stream=(VALIDATION_STREAM, 300), **self.engine)
        pvalues = {}
        for detector in Detector:
            result = stats.kstest(samples[detector],
                                  lambda x, d=detector: analytic.null_cdf(d, x, self.dist, order=self.order))
            pvalues[detector] = float(result.pvalue)
        ok = all(p > KS_LEVEL for p in pvalues.values())
        return ok, ", ".join(f"{d.value} KS p={p:.3f}" for d, p in pvalues.items())

    def check_quadrature_convergence(self) -> CheckOutcome:
        worst = 0.0
        for detector in Detector:
            eta = self._threshold(detector)
            for snr_db in self.scenario.snr_grid_db:
                p = self.dist.with_rho(db_to_linear(snr_db))
                coarse = analytic.pd(detector, eta, p, order=self.order, check_convergence=False)
                fine = analytic.pd(detector, eta, p, order=2 * self.order, check_convergence=False)
                worst = max(worst, abs(coarse - fine))
            coarse = analytic.pfa_amgdd(eta, self.dist, order=self.order, check_convergence=False)
            fine = analytic.pfa_amgdd(eta, self.dist, order=2 * self.order, check_convergence=False)
            worst = max(worst, abs(coarse - fine))
        return worst < 1e-9, f"largest change on doubling order {self.order}: {worst:.1e}"

    def check_threshold_round_trip(self) -> CheckOutcome:
        worst = 0.0
        for detector in Detector:
            for target in (1e-1, 1e-2, 1e-3):
                eta = analytic.threshold(detector, target, self.dist, order=self.order)
                back = analytic.pfa(detector, eta, self.dist, order=self.order)
                worst = max(worst, abs(back - target) / target)
        return worst <= 1e-9, f"worst relative PFA error {worst:.1e}"

    # Monte Carlo

    def check_determinism(self) -> CheckOutcome:
        s, m, n = self.scenario, self.signal, self.noise
        chunk = 1000
        first = simulate_statistics(s, m, n, 10.0, 5 * chunk, s.seed, stream=(VALIDATION_STREAM, 400),
                                    chunk_size=chunk)
        second = simulate_statistics(s, m, n, 10.0, 5 * chunk, s.seed, stream=(VALIDATION_STREAM, 400),
                                     chunk_size=chunk)
        pooled = simulate_statistics(s, m, n, 10.0, 5 * chunk, s.seed, stream=(VALIDATION_STREAM, 400),
                                     chunk_size=chunk, workers=2)
        same = all(np.array_equal(first[d], second[d]) and np.array_equal(first[d], pooled[d])
                   for d in Detector)

        small = replace(s, trials_pd=500, snr_grid_db=s.snr_grid_db[:2])
        writer = ReportWriter()
        csv_a = writer.curve_csv(sweep(small, m, n, chunk_size=chunk).points)
        csv_b = writer.curve_csv(sweep(small, m, n, chunk_size=chunk).points)
        ok = same and csv_a == csv_b
        return ok, "identical samples for repeated and 2-worker runs; identical CSV" if ok \
            else "runs differ"

    def check_pfa_reproduction(self) -> CheckOutcome:
        s = self.scenario
        trials = s.trials_calibration
        samples = simulate_statistics(s, self.signal, self.noise, 0.0, trials, s.seed,
                                      stream=(VALIDATION_STREAM, 500), **self.engine)
        band = 3.0 * math.sqrt(s.pfa_target * (1.0 - s.pfa_target) / trials)
        rates = {d: float(np.mean(samples[d] > self._threshold(d))) for d in Detector}
        ok = all(abs(rate - s.pfa_target) <= band for rate in rates.values())
        detail = ", ".join(f"{d.value} {r:.3e}" for d, r in rates.items())
        return ok, f"{detail} (target {s.pfa_target:g} +/- {band:.1e}, {trials} trials)"

    def check_empirical_threshold(self) -> CheckOutcome:
        s = self.scenario
        band = 3.0 * math.sqrt(s.pfa_target * (1.0 - s.pfa_target) / s.trials_calibration) \
            + 1.0 / s.trials_calibration
        details = []
        ok = True
        for detector in Detector:
            eta = calibrate_threshold(s, self.signal, self.noise, detector,
                                      stream=(VALIDATION_STREAM, 600), **self.engine)
            implied = float(analytic.pfa(detector, eta, self.dist, order=self.order))
            ok &= abs(implied - s.pfa_target) <= band
            details.append(f"{detector.value} eta={eta:.5g} pfa(eta)={implied:.3e}")
        return ok, ", ".join(details)

    def check_pd_agreement(self) -> CheckOutcome:
        result = sweep(self.scenario, self.signal, self.noise, quadrature_order=self.order, **self.engine)
        outside = [p for p in result.points if not p.within_ci()]
        ok = not outside and not result.failures
        detail = f"{len(result.points)} points, {len(outside)} outside tolerance"
        if outside:
            detail += "; " + ", ".join(f"{p.detector.value}@{p.snr_db:g}dB" for p in outside)
        if result.failures:
            detail += f"; {len(result.failures)} failed points"
        return ok, detail

    def check_ordering(self) -> CheckOutcome:
        s = self.scenario
        curves = {}
        for label, geometry in (('P=6', Scenario.baseline), ('P=9', Scenario.wide)):
            scenario = geometry(pfa_target=s.pfa_target, snr_grid_db=s.snr_grid_db)
            dist = analytic.DistParams.from_scenario(scenario)
            for detector in Detector:
                eta = analytic.threshold(detector, s.pfa_target, dist, order=self.order)
                curves[label, detector] = np.array([
                    analytic.pd(detector, eta, dist.with_rho(db_to_linear(x)), order=self.order)
                    for x in s.snr_grid_db])
        glrgdd_first = all(np.all(curves[g, Detector.GLRGDD] >= curves[g, Detector.AMGDD] - 1e-12)
                           for g in ('P=6', 'P=9'))
        more_columns = all(np.all(curves['P=9', d] >= curves['P=6', d] - 1e-12) for d in Detector)
        return glrgdd_first and more_columns, \
            f"GLRGDD >= AMGDD: {glrgdd_first}, P=9 >= P=6: {more_columns}"

    def check_cfar_thresholds(self) -> CheckOutcome:
        s = self.scenario
        bands = {}
        for index, noise in enumerate((NoiseModel.identity(s.n_channels), self.noise)):
            samples = simulate_statistics(s, self.signal, noise, 0.0, s.trials_calibration, s.seed,
                                          stream=(VALIDATION_STREAM, 700 + index), **self.engine)
            for detector in Detector:
                bands[detector, index] = threshold_band(samples[detector], s.pfa_target)
        ok = True
        details = []
        for detector in Detector:
            (lo_a, hi_a), (lo_b, hi_b) = bands[detector, 0], bands[detector, 1]
            overlap = lo_a <= hi_b and lo_b <= hi_a
            ok &= overlap
            details.append(f"{detector.value} [{lo_a:.4g}, {hi_a:.4g}] vs [{lo_b:.4g}, {hi_b:.4g}]")
        return ok, "; ".join(details)

    def check_threshold_band_nesting(self) -> CheckOutcome:
        s = self.scenario
        large = s.trials_calibration
        small = max(large // 10, math.ceil(10.0 / s.pfa_target))
        ok = True
        details = []
        samples_small = simulate_statistics(s, self.signal, self.noise, 0.0, small, s.seed,
                                            stream=(VALIDATION_STREAM, 800), **self.engine)
        samples_large = simulate_statistics(s, self.signal, self.noise, 0.0, large, s.seed,
                                            stream=(VALIDATION_STREAM, 801), **self.engine)
        for detector in Detector:
            lo_s, hi_s = threshold_band(samples_small[detector], s.pfa_target)
            lo_l, hi_l = threshold_band(samples_large[detector], s.pfa_target)
            narrower = (hi_l - lo_l) <= (hi_s - lo_s)
            overlap = lo_s <= hi_l and lo_l <= hi_s
            ok &= narrower and overlap
            details.append(f"{detector.value} width {hi_s - lo_s:.3g} -> {hi_l - lo_l:.3g}")
        return ok, f"{small} vs {large} trials: " + ", ".join(details)

