#!/usr/bin/env python3
"""
GLRGDD and AMGDD test statistics
Reduced forms evaluated through one Cholesky whitening of the effective
sample matrix, the unreduced forms used as reference oracles, and a batched
kernel for the Monte Carlo engine
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np

from .exceptions import DomainError, NotPositiveDefiniteError, NumericalError
from .matrix_core import (
    cholesky_lower,
    hermitian_part,
    hermitian_solve,
    whiten,
    whiten_batch,
)
from .model import SignalModel, TrialData

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# largest double below one; keeps t/(1 - t) finite
_BELOW_ONE = float(np.nextafter(1.0, 0.0))


class Detector(str, Enum):
    GLRGDD = "glrgdd"
    AMGDD = "amgdd"


class ScmMode(str, Enum):
    """Covariance estimate used by the AMGDD"""

    AUGMENTED = "augmented"
    RAW = "raw"


@dataclass(frozen=True, eq=False)
class DetectorWorkspace:
    """S = Z_L·Z_Lᴴ, S₊ = S + Z·P⊥·Zᴴ and Z_* = Z·Cᴴ(CCᴴ)^(−1/2) for one trial"""

    S: np.ndarray
    S_plus: np.ndarray
    Z_star: np.ndarray
    s_plus_factor: np.ndarray


@dataclass(frozen=True)
class DetectorOutput:
    t_glrgdd: float
    t_glrgdd_prime: float
    t_amgdd: float

    def statistic(self, detector: Detector) -> float:
        """Value compared against the threshold; GLRGDD is thresholded on t′"""
        return self.t_glrgdd_prime if Detector(detector) is Detector.GLRGDD else self.t_amgdd


@dataclass(frozen=True, eq=False)
class BatchOutput:
    t_glrgdd: np.ndarray
    t_glrgdd_prime: np.ndarray
    t_amgdd: np.ndarray

    def __len__(self) -> int:
        return self.t_glrgdd.size

    def statistic(self, detector: Detector) -> np.ndarray:
        return self.t_glrgdd_prime if Detector(detector) is Detector.GLRGDD else self.t_amgdd


def _check_dims(Z: np.ndarray, Z_L: np.ndarray, m: SignalModel):
    O, P, Q = m.n_channels, m.n_columns, m.subspace_dim
    if Z.shape[-2:] != (O, P):
        raise DomainError(f"Z has shape {Z.shape[-2:]}, expected {(O, P)}", context="detectors")
    if Z_L.shape[-2] != O:
        raise DomainError(f"Z_L has {Z_L.shape[-2]} rows, expected {O}", context="detectors")
    L = Z_L.shape[-1]
    if L + P - Q < O:
        raise DomainError(f"L+P-Q={L + P - Q} < O={O}: S_plus is singular", context="detectors")


def _quadratic_forms(y: np.ndarray, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """D = yᴴy, g = Yᴴy, G = YᴴY for whitened steering vector y and whitened Z_*"""
    D = np.einsum('...o,...o->...', y.conj(), y).real
    g = np.einsum('...oq,...o->...q', Y.conj(), y)
    G = np.einsum('...op,...oq->...pq', Y.conj(), Y)
    return D, g, G


def _kelly_numerator(g: np.ndarray, G: np.ndarray) -> np.ndarray:
    """gᴴ(I + G)⁻¹g"""
    inner = np.eye(G.shape[-1]) + G
    try:
        sol = np.linalg.solve(inner, g[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise NumericalError("inner matrix I + Z_*ᴴS₊⁻¹Z_* is singular", context="detectors") from exc
    return np.einsum('...q,...q->...', g.conj(), sol).real


def _glrgdd_pair(numerator: np.ndarray, D: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    t = np.minimum(numerator / D, _BELOW_ONE)
    remainder = D - numerator
    with np.errstate(divide='ignore'):
        t_prime = np.where(remainder > 0, numerator / np.where(remainder > 0, remainder, 1.0), np.inf)
    return t, t_prime


def build_workspace(d: TrialData, m: SignalModel) -> DetectorWorkspace:
    _check_dims(d.Z, d.Z_L, m)
    S = hermitian_part(d.Z_L @ d.Z_L.conj().T)
    residual = d.Z @ m.row_complement
    S_plus = hermitian_part(S + residual @ residual.conj().T)
    Z_star = d.Z @ m.row_basis
    try:
        factor = cholesky_lower(S_plus)
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError(exc.pivot, context="detectors") from exc
    return DetectorWorkspace(S=S, S_plus=S_plus, Z_star=Z_star, s_plus_factor=factor)


def _whitened(factor: np.ndarray, m: SignalModel, Z_star: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    X = whiten(factor, np.column_stack([m.a, Z_star]))
    return X[:, 0], X[:, 1:]


def _raw_factor(ws: DetectorWorkspace, n_training: int) -> np.ndarray:
    if n_training < ws.S.shape[0]:
        raise DomainError(
            f"raw SCM needs L >= O (L={n_training}, O={ws.S.shape[0]})", context="detectors")
    try:
        return cholesky_lower(ws.S)
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError(exc.pivot, context="detectors") from exc


def _from_workspace(d: TrialData, m: SignalModel, ws: DetectorWorkspace,
                    scm_mode: ScmMode) -> DetectorOutput:
    y, Y = _whitened(ws.s_plus_factor, m, ws.Z_star)
    D, g, G = _quadratic_forms(y, Y)
    t, t_prime = _glrgdd_pair(_kelly_numerator(g, G), D)

    if ScmMode(scm_mode) is ScmMode.RAW:
        y, Y = _whitened(_raw_factor(ws, d.Z_L.shape[1]), m, ws.Z_star)
        D, g, _ = _quadratic_forms(y, Y)
    t_amgdd = float(np.vdot(g, g).real / D)
    return DetectorOutput(t_glrgdd=float(t), t_glrgdd_prime=float(t_prime), t_amgdd=t_amgdd)


def evaluate(d: TrialData, m: SignalModel, scm_mode: ScmMode = ScmMode.AUGMENTED) -> DetectorOutput:
    """All statistics of one trial from a single workspace"""
    return _from_workspace(d, m, build_workspace(d, m), scm_mode)


def glrgdd(d: TrialData, m: SignalModel) -> float:
    """aᴴS₊⁻¹Z_*(I + Z_*ᴴS₊⁻¹Z_*)⁻¹Z_*ᴴS₊⁻¹a / aᴴS₊⁻¹a, in [0, 1)"""
    return evaluate(d, m).t_glrgdd


def glrgdd_prime(t: ArrayLike) -> ArrayLike:
    """t/(1 − t), the strictly increasing transform whose law is the complex F"""
    values = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values < 0.0) or np.any(values >= 1.0):
        raise DomainError("t must lie in [0, 1)", context="detectors")
    result = values / (1.0 - values)
    return float(result) if result.ndim == 0 else result


def amgdd(d: TrialData, m: SignalModel, scm_mode: ScmMode = ScmMode.AUGMENTED) -> float:
    """aᴴM⁻¹Z_*Z_*ᴴM⁻¹a / aᴴM⁻¹a with M = S₊ (augmented) or M = S (raw)"""
    return evaluate(d, m, scm_mode).t_amgdd


def evaluate_batch(Z: np.ndarray, Z_L: np.ndarray, m: SignalModel,
                   scm_mode: ScmMode = ScmMode.AUGMENTED) -> BatchOutput:
    """Statistics for a (B, O, P) stack of test data and a (B, O, L) stack of training data"""
    Z = np.asarray(Z, dtype=np.complex128)
    Z_L = np.asarray(Z_L, dtype=np.complex128)
    _check_dims(Z, Z_L, m)
    batch = Z.shape[0]

    S = hermitian_part(Z_L @ np.conj(np.swapaxes(Z_L, -1, -2)))
    residual = Z @ m.row_complement
    S_plus = hermitian_part(S + residual @ np.conj(np.swapaxes(residual, -1, -2)))
    Z_star = Z @ m.row_basis

    steering = np.broadcast_to(m.a[:, None], (batch, m.n_channels, 1))
    rhs = np.concatenate([steering, Z_star], axis=-1)

    X = whiten_batch(S_plus, rhs)
    D, g, G = _quadratic_forms(X[..., 0], X[..., 1:])
    t, t_prime = _glrgdd_pair(_kelly_numerator(g, G), D)

    if ScmMode(scm_mode) is ScmMode.RAW:
        if Z_L.shape[-1] < m.n_channels:
            raise DomainError(
                f"raw SCM needs L >= O (L={Z_L.shape[-1]}, O={m.n_channels})", context="detectors")
        X = whiten_batch(S, rhs)
        D, g, _ = _quadratic_forms(X[..., 0], X[..., 1:])
    t_amgdd = np.einsum('...q,...q->...', g.conj(), g).real / D

    return BatchOutput(t_glrgdd=t, t_glrgdd_prime=t_prime, t_amgdd=t_amgdd)


# Reference forms. These work in the full O- and P-dimensional spaces and are
# only used to cross-check the reduced kernel.

def glrgdd_unreduced(d: TrialData, m: SignalModel) -> float:
    """Full GLRT expression built from S⁻¹, the P×P matrix I + ZᴴS⁻¹Z and C.

    Evaluates to t/(1 − t) of the reduced statistic. Needs L >= O so that S is
    invertible.
    """
    _check_dims(d.Z, d.Z_L, m)
    O, L = m.n_channels, d.Z_L.shape[1]
    if L < O:
        raise DomainError(f"unreduced form needs L >= O (L={L}, O={O})", context="detectors")

    Z, C, a = d.Z, m.C, m.a
    S = hermitian_part(d.Z_L @ d.Z_L.conj().T)
    s_inv_a = hermitian_solve(S, a)
    s_inv_z = hermitian_solve(S, Z)

    inner = hermitian_part(np.eye(Z.shape[1]) + Z.conj().T @ s_inv_z)
    u = hermitian_solve(inner, Z.conj().T @ s_inv_a)
    core = hermitian_part(C @ hermitian_solve(inner, C.conj().T))
    v = C @ u
    numerator = np.vdot(v, hermitian_solve(core, v)).real

    loaded = hermitian_part(S + Z @ Z.conj().T)
    denominator = np.vdot(a, hermitian_solve(loaded, a)).real
    return float(numerator / denominator)


def glrgdd_woodbury(d: TrialData, m: SignalModel) -> float:
    """1 − aᴴ(S + ZZᴴ)⁻¹a / aᴴS₊⁻¹a, valid whenever S₊ is invertible"""
    ws = build_workspace(d, m)
    a = m.a
    loaded = hermitian_part(ws.S + d.Z @ d.Z.conj().T)
    ratio = np.vdot(a, hermitian_solve(loaded, a)).real / np.vdot(a, hermitian_solve(ws.S_plus, a)).real
    return float(1.0 - ratio)


def amgdd_unreduced(d: TrialData, m: SignalModel, scm_mode: ScmMode = ScmMode.AUGMENTED) -> float:
    """aᴴM⁻¹Z·P_C·ZᴴM⁻¹a / aᴴM⁻¹a with the projector applied in the P-dimensional column space"""
    ws = build_workspace(d, m)
    if ScmMode(scm_mode) is ScmMode.RAW:
        _raw_factor(ws, d.Z_L.shape[1])
        M = ws.S
    else:
        M = ws.S_plus
    x = hermitian_solve(M, m.a)
    w = d.Z.conj().T @ x
    numerator = np.vdot(w, m.row_projector @ w).real
    return float(numerator / np.vdot(m.a, x).real)
