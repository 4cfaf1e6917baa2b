#!/usr/bin/env python3
"""
Scenario, signal and noise models
Holds the problem dimensions, the rank-one signal H = θ·a·αᴴ·C, the noise
covariance and the SNR parameterization shared by every other module
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .exceptions import DomainError, ScenarioError
from .matrix_core import cholesky_lower, gram_inv_sqrt, projector, whiten

logger = logging.getLogger(__name__)

DEFAULT_CORRELATION = 0.95
DEFAULT_SNR_GRID_DB: Tuple[float, ...] = tuple(float(x) for x in range(0, 26, 2))
MAX_SEED = 2 ** 64 - 1


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.flags.writeable = False
    return array


def db_to_linear(snr_db: float) -> float:
    """Convert an SNR in dB to the linear value used everywhere else"""
    return float(10.0 ** (float(snr_db) / 10.0))


def dimension_issues(n_channels: int, n_columns: int, subspace_dim: int,
                     n_training: int) -> List[Tuple[str, str]]:
    """Violated dimension bounds as (config key, message) pairs"""
    O, P, Q, L = n_channels, n_columns, subspace_dim, n_training
    issues: List[Tuple[str, str]] = []
    for key, value in (('O', O), ('P', P), ('Q', Q), ('L', L)):
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            issues.append((key, f"{key}={value!r} is not an integer"))
    if issues:
        return issues

    if O < 2:
        issues.append(('O', f"O={O} < 2"))
    if P < 1:
        issues.append(('P', f"P={P} < 1"))
    if L < 1:
        issues.append(('L', f"L={L} < 1"))
    if Q < 1:
        issues.append(('Q', f"Q={Q} < 1"))
    if Q > P:
        issues.append(('Q', f"Q={Q} > P={P}"))
    if L + P - Q < O:
        issues.append(('L', f"L+P-Q={L + P - Q} < O={O}"))
    if L + P < O + 1:
        issues.append(('L', f"L+P={L + P} < O+1={O + 1}"))
    return issues


def dimension_errors(n_channels: int, n_columns: int, subspace_dim: int,
                     n_training: int) -> List[str]:
    return [message for _, message in
            dimension_issues(n_channels, n_columns, subspace_dim, n_training)]


@dataclass(frozen=True)
class Scenario:
    """Problem dimensions, false-alarm target, SNR grid and Monte Carlo budget"""

    n_channels: int = 12
    n_columns: int = 6
    subspace_dim: int = 3
    n_training: int = 11
    pfa_target: float = 1e-3
    snr_grid_db: Tuple[float, ...] = DEFAULT_SNR_GRID_DB
    seed: int = 20250503
    trials_calibration: int = 100_000
    trials_pd: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, 'snr_grid_db', tuple(float(x) for x in self.snr_grid_db))

    @classmethod
    def baseline(cls, **overrides) -> 'Scenario':
        """O=12, P=6, Q=3, L=11"""
        return cls(**overrides)

    @classmethod
    def wide(cls, **overrides) -> 'Scenario':
        """Same as baseline with P=9"""
        values = {'n_columns': 9}
        values.update(overrides)
        return cls(**values)

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        return self.n_channels, self.n_columns, self.subspace_dim, self.n_training

    def issues(self) -> List[Tuple[str, str]]:
        return scenario_issues(self)

    def require_valid(self) -> 'Scenario':
        errors = validate_scenario(self)
        if errors:
            raise ScenarioError(errors)
        return self


def scenario_issues(s: Scenario) -> List[Tuple[str, str]]:
    """Every violated scenario bound, keyed by the config key that carries it"""
    issues = dimension_issues(*s.dims)

    if not (isinstance(s.pfa_target, (int, float)) and 0.0 < s.pfa_target < 1.0):
        issues.append(('pfa', f"pfa={s.pfa_target!r} is not in (0, 1)"))

    grid = s.snr_grid_db
    if not grid:
        issues.append(('snr_db', "snr_db is empty"))
    elif not all(math.isfinite(x) for x in grid):
        issues.append(('snr_db', "snr_db contains non-finite values"))
    else:
        for left, right in zip(grid, grid[1:]):
            if right <= left:
                issues.append(('snr_db', f"snr_db is not strictly increasing ({left:g} then {right:g})"))
                break

    if isinstance(s.seed, bool) or not isinstance(s.seed, (int, np.integer)) or not 0 <= s.seed <= MAX_SEED:
        issues.append(('seed', f"seed={s.seed!r} is not a 64-bit unsigned integer"))
    for key, value in (('trials_calibration', s.trials_calibration), ('trials_pd', s.trials_pd)):
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
            issues.append((key, f"{key}={value!r} must be a positive integer"))
    return issues


def validate_scenario(s: Scenario) -> List[str]:
    """Return every violated scenario invariant; an empty list means the scenario is valid"""
    return [message for _, message in scenario_issues(s)]


@dataclass(frozen=True, eq=False)
class SignalModel:
    """Rank-one signal θ·a·αᴴ·C with the row-space quantities the detectors reuse"""

    a: np.ndarray
    C: np.ndarray
    alpha: np.ndarray
    theta: complex = 1.0
    row_projector: np.ndarray = field(init=False, repr=False)
    row_complement: np.ndarray = field(init=False, repr=False)
    row_basis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = _frozen(np.asarray(self.a, dtype=np.complex128).ravel())
        C = _frozen(np.atleast_2d(np.asarray(self.C, dtype=np.complex128)))
        alpha = _frozen(np.asarray(self.alpha, dtype=np.complex128).ravel())

        if a.size == 0 or not np.any(a):
            raise DomainError("steering vector a must be nonzero", context="model")
        if alpha.shape != (C.shape[0],):
            raise DomainError(
                f"alpha has length {alpha.size}, C has {C.shape[0]} rows", context="model")

        proj, perp = projector(C)
        # Cᴴ(CCᴴ)^(-1/2) has orthonormal columns spanning the row space of C
        basis = C.conj().T @ gram_inv_sqrt(C)

        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'C', C)
        object.__setattr__(self, 'alpha', alpha)
        object.__setattr__(self, 'theta', complex(self.theta))
        object.__setattr__(self, 'row_projector', _frozen(proj))
        object.__setattr__(self, 'row_complement', _frozen(perp))
        object.__setattr__(self, 'row_basis', _frozen(basis))

    @property
    def n_channels(self) -> int:
        return self.a.size

    @property
    def n_columns(self) -> int:
        return self.C.shape[1]

    @property
    def subspace_dim(self) -> int:
        return self.C.shape[0]

    def row_energy(self) -> float:
        """αᴴ·C·Cᴴ·α"""
        row = self.alpha.conj() @ self.C
        return float(np.real(np.vdot(row, row)))

    def signal_matrix(self) -> np.ndarray:
        """H = θ·a·αᴴ·C (O×P, rank at most one)"""
        return self.theta * np.outer(self.a, self.alpha.conj() @ self.C)

    def with_theta(self, theta: complex) -> 'SignalModel':
        return replace(self, theta=complex(theta))

    def with_alpha(self, alpha) -> 'SignalModel':
        return replace(self, alpha=alpha)


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Hermitian positive-definite noise covariance R and its lower Cholesky factor"""

    R: np.ndarray
    factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        R = _frozen(np.asarray(self.R, dtype=np.complex128))
        object.__setattr__(self, 'R', R)
        object.__setattr__(self, 'factor', _frozen(cholesky_lower(R)))

    @classmethod
    def exponential(cls, n_channels: int, corr: float = DEFAULT_CORRELATION) -> 'NoiseModel':
        """R(k1, k2) = corr^|k1 − k2|"""
        if not 0.0 <= corr < 1.0:
            raise DomainError(f"covariance coefficient {corr} is not in [0, 1)", context="model")
        k = np.arange(n_channels)
        return cls(corr ** np.abs(k[:, None] - k[None, :]).astype(float))

    @classmethod
    def identity(cls, n_channels: int) -> 'NoiseModel':
        return cls(np.eye(n_channels))

    @property
    def n_channels(self) -> int:
        return self.R.shape[0]

    def inv_quadratic(self, a) -> float:
        """aᴴ·R⁻¹·a"""
        y = whiten(self.factor, np.asarray(a, dtype=np.complex128))
        return float(np.real(np.vdot(y, y)))


@dataclass(frozen=True, eq=False)
class TrialData:
    """One realization: test data Z (O×P) and training data Z_L (O×L)"""

    Z: np.ndarray
    Z_L: np.ndarray

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.Z, dtype=np.complex128))
        Z_L = np.atleast_2d(np.asarray(self.Z_L, dtype=np.complex128))
        if Z.ndim != 2 or Z_L.ndim != 2 or Z.shape[0] != Z_L.shape[0]:
            raise DomainError(
                f"Z {Z.shape} and Z_L {Z_L.shape} must be matrices with the same row count",
                context="model")
        object.__setattr__(self, 'Z', _frozen(Z))
        object.__setattr__(self, 'Z_L', _frozen(Z_L))

    def matches(self, s: Scenario) -> bool:
        return (self.Z.shape == (s.n_channels, s.n_columns)
                and self.Z_L.shape == (s.n_channels, s.n_training))


def _snr_scale(m: SignalModel, n: NoiseModel) -> float:
    if m.n_channels != n.n_channels:
        raise DomainError(
            f"signal has {m.n_channels} channels, noise has {n.n_channels}", context="model")
    scale = m.row_energy() * n.inv_quadratic(m.a)
    if not scale > 0.0:
        raise DomainError("SNR is undefined for zero alpha or zero steering vector", context="model")
    return scale


def snr_to_theta(rho: float, m: SignalModel, n: NoiseModel) -> complex:
    """Zero-phase θ with |θ|²·αᴴCCᴴα·aᴴR⁻¹a = rho"""
    rho = float(rho)
    if not (math.isfinite(rho) and rho >= 0.0):
        raise DomainError(f"SNR must be finite and nonnegative, got {rho}", context="model")
    return complex(math.sqrt(rho / _snr_scale(m, n)))


def snr_from_theta(theta: complex, m: SignalModel, n: NoiseModel) -> float:
    return float(abs(theta) ** 2 * _snr_scale(m, n))


def default_signal_model(s: Scenario, spatial_freq: float = 0.0,
                         seed: Optional[int] = None) -> SignalModel:
    """Steering vector exp(j2π·f·k), the first Q rows of the unitary P-point DFT
    and a uniform α.

    With a seed, α is instead a random unit vector drawn from that seed.
    """
    O, P, Q, _ = s.dims
    a = np.exp(2j * np.pi * spatial_freq * np.arange(O))
    C = np.exp(-2j * np.pi * np.outer(np.arange(Q), np.arange(P)) / P) / np.sqrt(P)

    if seed is None:
        alpha = np.ones(Q) / np.sqrt(Q)
    else:
        rng = np.random.default_rng(seed)
        draw = rng.standard_normal(Q) + 1j * rng.standard_normal(Q)
        alpha = draw / np.linalg.norm(draw)

    logger.debug(f"Default signal model: O={O}, P={P}, Q={Q}, spatial_freq={spatial_freq}")
    return SignalModel(a=a, C=C, alpha=alpha)
