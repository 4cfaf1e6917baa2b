#!/usr/bin/env python3
"""
Monte Carlo engine
Trial generation, empirical threshold calibration, PD estimation and full
SNR sweeps. Trials are drawn in fixed-size chunks whose random streams are
spawned from the master seed, so results do not depend on the worker count.
"""

import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from . import analytic
from .detectors import Detector, ScmMode, evaluate_batch
from .exceptions import CalibrationError, DomainError, GddError
from .matrix_core import sample_colored_gaussian
from .model import NoiseModel, Scenario, SignalModel, TrialData, db_to_linear, snr_to_theta

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 2000
CI_SIGMAS = 3.0

# stream keys under the master seed
CALIBRATION_STREAM = (0,)
SWEEP_STREAM = 1
NULL_STREAM = (2,)


@dataclass(frozen=True)
class McResult:
    """Fraction of trials above eta with its 3σ binomial half-width"""

    detector: Detector
    eta_used: float
    estimate: float
    trials: int
    ci_halfwidth: float
    seed: int

    @classmethod
    def from_count(cls, detector: Detector, eta: float, hits: int, trials: int,
                   seed: int) -> 'McResult':
        estimate = hits / trials
        return cls(detector=Detector(detector), eta_used=float(eta), estimate=estimate,
                   trials=trials, ci_halfwidth=binomial_halfwidth(estimate, trials), seed=seed)

    def agrees_with(self, theory: float, sigmas: float = CI_SIGMAS) -> bool:
        return abs(theory - self.estimate) <= agreement_tolerance(theory, self.estimate, self.trials, sigmas)


@dataclass(frozen=True)
class PerfPoint:
    """One CSV row: theory and Monte Carlo PD at a single SNR for one detector"""

    snr_db: float
    detector: Detector
    pd_theory: float
    pd_mc: float
    ci_halfwidth: float
    eta: float
    pfa_target: float
    seed: int
    trials: int

    def within_ci(self, sigmas: float = CI_SIGMAS) -> bool:
        tolerance = agreement_tolerance(self.pd_theory, self.pd_mc, self.trials, sigmas)
        return abs(self.pd_theory - self.pd_mc) <= tolerance


@dataclass(frozen=True)
class PointFailure:
    snr_db: float
    detector: Detector
    error: str


@dataclass
class SweepResult:
    points: List[PerfPoint] = field(default_factory=list)
    failures: List[PointFailure] = field(default_factory=list)
    thresholds: Dict[Detector, float] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.failures)


def binomial_halfwidth(p: float, trials: int, sigmas: float = CI_SIGMAS) -> float:
    return sigmas * math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def agreement_tolerance(theory: float, estimate: float, trials: int,
                        sigmas: float = CI_SIGMAS) -> float:
    """Allowed |theory − estimate|.

    The larger of the band around the estimate and the band around the
    theoretical value, plus one trial of resolution. The theoretical band keeps
    the test meaningful when the estimate saturates at 0 or 1.
    """
    band = max(binomial_halfwidth(estimate, trials, sigmas), binomial_halfwidth(theory, trials, sigmas))
    return band + 1.0 / trials


def _check_compatible(s: Scenario, m: SignalModel, n: NoiseModel):
    if (m.n_channels, m.n_columns, m.subspace_dim) != (s.n_channels, s.n_columns, s.subspace_dim):
        raise DomainError(
            f"signal model dims {(m.n_channels, m.n_columns, m.subspace_dim)} do not match "
            f"scenario {(s.n_channels, s.n_columns, s.subspace_dim)}", context="montecarlo")
    if n.n_channels != s.n_channels:
        raise DomainError(f"noise model has {n.n_channels} channels, scenario has {s.n_channels}",
                          context="montecarlo")


def gen_trial(s: Scenario, m: SignalModel, n: NoiseModel, rho: float,
              rng: np.random.Generator) -> TrialData:
    """Z = θ·a·αᴴ·C + V and noise-only training data; rho = 0 gives H0"""
    _check_compatible(s, m, n)
    signal = m.with_theta(snr_to_theta(rho, m, n)).signal_matrix()
    noise = sample_colored_gaussian(n, s.n_columns, rng)
    training = sample_colored_gaussian(n, s.n_training, rng)
    return TrialData(Z=signal + noise, Z_L=training)


def gen_batch(s: Scenario, m: SignalModel, n: NoiseModel, rho: float,
              rng: np.random.Generator, size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Stacks of `size` test and training matrices"""
    _check_compatible(s, m, n)
    signal = m.with_theta(snr_to_theta(rho, m, n)).signal_matrix()
    noise = sample_colored_gaussian(n, s.n_columns, rng, size=size)
    training = sample_colored_gaussian(n, s.n_training, rng, size=size)
    return signal + noise, training


@dataclass(frozen=True)
class _ChunkTask:
    scenario: Scenario
    signal: SignalModel
    noise: NoiseModel
    rho: float
    size: int
    seed: np.random.SeedSequence
    scm_mode: ScmMode
    detectors: Tuple[Detector, ...]


def _run_chunk(task: _ChunkTask) -> Dict[Detector, np.ndarray]:
    rng = np.random.default_rng(task.seed)
    Z, Z_L = gen_batch(task.scenario, task.signal, task.noise, task.rho, rng, task.size)
    output = evaluate_batch(Z, Z_L, task.signal, task.scm_mode)
    return {detector: output.statistic(detector) for detector in task.detectors}


def simulate_statistics(s: Scenario, m: SignalModel, n: NoiseModel, rho: float, trials: int,
                        seed: int, *, stream: Sequence[int] = (),
                        detectors: Sequence[Detector] = tuple(Detector),
                        scm_mode: ScmMode = ScmMode.AUGMENTED,
                        chunk_size: int = DEFAULT_CHUNK_SIZE, workers: int = 1,
                        progress: bool = False) -> Dict[Detector, np.ndarray]:
    """Statistic samples for `trials` independent trials at linear SNR rho.

    Chunk i draws from SeedSequence(seed, spawn_key=stream).spawn(n)[i] and
    the samples come back in chunk order, so the output is identical for any
    worker count.
    """
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}", context="montecarlo")
    if chunk_size < 1:
        raise DomainError(f"chunk_size must be positive, got {chunk_size}", context="montecarlo")
    _check_compatible(s, m, n)

    detectors = tuple(Detector(d) for d in detectors)
    n_chunks = -(-trials // chunk_size)
    seeds = np.random.SeedSequence(seed, spawn_key=tuple(stream)).spawn(n_chunks)
    sizes = [chunk_size] * (n_chunks - 1) + [trials - chunk_size * (n_chunks - 1)]
    tasks = [_ChunkTask(s, m, n, float(rho), size, chunk_seed, ScmMode(scm_mode), detectors)
             for size, chunk_seed in zip(sizes, seeds)]
    logger.debug(f"{trials} trials at rho={rho:g} in {n_chunks} chunks on {workers} worker(s), "
                 f"stream {tuple(stream)}")

    results: List[Dict[Detector, np.ndarray]] = []
    with tqdm(total=trials, desc=f"rho={rho:.4g}", unit="trial", disable=not progress) as bar:
        if workers > 1 and n_chunks > 1:
            with Pool(processes=min(workers, n_chunks)) as pool:
                for task, result in zip(tasks, pool.imap(_run_chunk, tasks)):
                    results.append(result)
                    bar.update(task.size)
        else:
            for task in tasks:
                results.append(_run_chunk(task))
                bar.update(task.size)

    return {d: np.concatenate([result[d] for result in results]) for d in detectors}


def order_statistic_threshold(samples: np.ndarray, pfa_target: float) -> float:
    """Empirical (1 − pfa) quantile: the ⌈n·(1 − pfa)⌉-th smallest sample"""
    samples = np.asarray(samples, dtype=float).ravel()
    n = samples.size
    if n == 0:
        raise CalibrationError("no samples to calibrate on", context="montecarlo")
    rank = min(max(math.ceil(n * (1.0 - pfa_target) - 1e-9), 1), n)
    return float(np.sort(samples, kind="stable")[rank - 1])


def threshold_band(samples: np.ndarray, pfa_target: float,
                   sigmas: float = CI_SIGMAS) -> Tuple[float, float]:
    """Distribution-free band for the (1 − pfa) quantile from binomial order-statistic ranks"""
    samples = np.sort(np.asarray(samples, dtype=float).ravel())
    n = samples.size
    centre = n * (1.0 - pfa_target)
    spread = sigmas * math.sqrt(n * pfa_target * (1.0 - pfa_target))
    lo = min(max(math.floor(centre - spread), 1), n)
    hi = min(max(math.ceil(centre + spread), 1), n)
    return float(samples[lo - 1]), float(samples[hi - 1])


def minimum_calibration_trials(pfa_target: float) -> int:
    return math.ceil(10.0 / pfa_target - 1e-9)


def calibrate_threshold(s: Scenario, m: SignalModel, n: NoiseModel, detector: Detector,
                        trials: Optional[int] = None, seed: Optional[int] = None, *,
                        stream: Sequence[int] = CALIBRATION_STREAM, **engine) -> float:
    """Empirical threshold from H0 samples of the detector statistic"""
    trials = s.trials_calibration if trials is None else trials
    seed = s.seed if seed is None else seed
    needed = minimum_calibration_trials(s.pfa_target)
    if trials < needed:
        raise CalibrationError(
            f"{trials} trials cannot resolve PFA {s.pfa_target:g} (need at least {needed})",
            context="montecarlo")
    samples = simulate_statistics(s, m, n, 0.0, trials, seed, stream=stream,
                                  detectors=(detector,), **engine)[Detector(detector)]
    eta = order_statistic_threshold(samples, s.pfa_target)
    logger.info(f"Calibrated {Detector(detector).value} threshold {eta:.6g} from {trials} H0 trials")
    return eta


def estimate_pd(s: Scenario, m: SignalModel, n: NoiseModel, detector: Detector, eta: float,
                rho: float, trials: Optional[int] = None, seed: Optional[int] = None, *,
                stream: Sequence[int] = (SWEEP_STREAM,), **engine) -> McResult:
    """Fraction of H1 trials whose statistic exceeds eta"""
    trials = s.trials_pd if trials is None else trials
    seed = s.seed if seed is None else seed
    samples = simulate_statistics(s, m, n, rho, trials, seed, stream=stream,
                                  detectors=(detector,), **engine)[Detector(detector)]
    return McResult.from_count(detector, eta, int(np.count_nonzero(samples > eta)), trials, seed)


def _thresholds(s: Scenario, m: SignalModel, n: NoiseModel, detectors: Sequence[Detector],
                source: str, order: int, engine: dict
                ) -> Tuple[Dict[Detector, Tuple[float, float]], Dict[Detector, str]]:
    """(analytic, used-for-MC) threshold per detector, and the error for each detector that failed"""
    dist = analytic.DistParams.from_scenario(s)
    chosen: Dict[Detector, Tuple[float, float]] = {}
    failed: Dict[Detector, str] = {}
    for detector in detectors:
        try:
            eta_theory = analytic.threshold(detector, s.pfa_target, dist, order=order)
            if source == "empirical":
                eta_mc = calibrate_threshold(s, m, n, detector, **engine)
            else:
                eta_mc = eta_theory
        except GddError as exc:
            logger.warning(f"{detector.value}: no threshold, skipping every SNR point: {exc}")
            failed[detector] = str(exc)
            continue
        chosen[detector] = (eta_theory, eta_mc)
        logger.info(f"{detector.value}: analytic threshold {eta_theory:.6g}, MC threshold {eta_mc:.6g}")
    return chosen, failed


def sweep(s: Scenario, m: SignalModel, n: NoiseModel, *,
          detectors: Sequence[Detector] = tuple(Detector),
          threshold_source: str = "analytic",
          scm_mode: ScmMode = ScmMode.AUGMENTED,
          quadrature_order: int = analytic.DEFAULT_QUADRATURE_ORDER,
          chunk_size: int = DEFAULT_CHUNK_SIZE, workers: int = 1,
          progress: bool = False) -> SweepResult:
    """Theory and Monte Carlo PD at every grid SNR for every detector.

    Failures at individual points are recorded and the sweep carries on. A
    detector whose threshold cannot be computed fails at every SNR.
    """
    detectors = tuple(Detector(d) for d in detectors)
    engine = dict(scm_mode=scm_mode, chunk_size=chunk_size, workers=workers, progress=progress)
    if ScmMode(scm_mode) is ScmMode.RAW:
        logger.warning("Raw SCM mode: the closed-form PD does not describe this AMGDD variant")

    result = SweepResult()
    thresholds, failed = _thresholds(s, m, n, detectors, threshold_source, quadrature_order, engine)
    result.thresholds = {d: eta_mc for d, (_, eta_mc) in thresholds.items()}
    active = tuple(d for d in detectors if d in thresholds)
    dist = analytic.DistParams.from_scenario(s)

    for index, snr_db in enumerate(s.snr_grid_db):
        result.failures.extend(PointFailure(snr_db, d, failed[d]) for d in detectors if d in failed)
        if not active:
            continue
        rho = db_to_linear(snr_db)
        try:
            samples = simulate_statistics(s, m, n, rho, s.trials_pd, s.seed,
                                          stream=(SWEEP_STREAM, index), detectors=active, **engine)
        except GddError as exc:
            logger.warning(f"SNR {snr_db:g} dB failed: {exc}")
            result.failures.extend(PointFailure(snr_db, d, str(exc)) for d in active)
            continue

        for detector in active:
            eta_theory, eta_mc = thresholds[detector]
            try:
                pd_theory = float(analytic.pd(detector, eta_theory, dist.with_rho(rho),
                                              order=quadrature_order))
            except GddError as exc:
                logger.warning(f"SNR {snr_db:g} dB, {detector.value}: {exc}")
                result.failures.append(PointFailure(snr_db, detector, str(exc)))
                continue
            mc = McResult.from_count(detector, eta_mc, int(np.count_nonzero(samples[detector] > eta_mc)),
                                     s.trials_pd, s.seed)
            result.points.append(PerfPoint(
                snr_db=snr_db, detector=detector, pd_theory=pd_theory, pd_mc=mc.estimate,
                ci_halfwidth=mc.ci_halfwidth, eta=eta_mc, pfa_target=s.pfa_target,
                seed=s.seed, trials=s.trials_pd))
        logger.info(f"SNR {snr_db:g} dB done ({index + 1}/{len(s.snr_grid_db)})")

    return result


def null_statistics(s: Scenario, m: SignalModel, n: NoiseModel, samples: int,
                    seed: Optional[int] = None, *, stream: Sequence[int] = NULL_STREAM,
                    detectors: Sequence[Detector] = tuple(Detector),
                    **engine) -> Dict[Detector, np.ndarray]:
    """Sorted H0 statistic samples per detector"""
    seed = s.seed if seed is None else seed
    drawn = simulate_statistics(s, m, n, 0.0, samples, seed, stream=stream,
                                detectors=detectors, **engine)
    return {d: np.sort(values) for d, values in drawn.items()}
