#!/usr/bin/env python3
"""
Dense complex linear algebra used by the detectors
Hermitian solves, row-space projectors, Gram inverse square roots and
colored complex-Gaussian sampling
"""

import logging
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np
from scipy import linalg

from .exceptions import NotPositiveDefiniteError, NumericalError, RankError

if TYPE_CHECKING:
    from .model import NoiseModel

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10


def _as_complex(matrix, name: str) -> np.ndarray:
    array = np.asarray(matrix, dtype=np.complex128)
    if not np.all(np.isfinite(array)):
        raise NumericalError(f"{name} contains NaN or Inf entries", context="matrix_core")
    return array


def hermitian_part(matrix: np.ndarray) -> np.ndarray:
    """Return (M + Mᴴ)/2 over the last two axes"""
    return 0.5 * (matrix + np.conj(np.swapaxes(matrix, -1, -2)))


def is_hermitian(matrix: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    """Check Hermitian symmetry relative to the largest entry"""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    if matrix.size == 0:
        return True
    scale = max(1.0, float(np.max(np.abs(matrix))))
    return bool(np.max(np.abs(matrix - matrix.conj().T)) <= tol * scale)


def cholesky_lower(matrix) -> np.ndarray:
    """Lower-triangular G with G·Gᴴ = M for a Hermitian positive-definite M.

    Raises NotPositiveDefiniteError carrying the 1-based order of the first
    leading minor that failed.
    """
    m = _as_complex(matrix, "matrix")
    if not is_hermitian(m):
        raise NumericalError("matrix is not Hermitian", context="matrix_core")

    potrf, = linalg.get_lapack_funcs(("potrf",), (m,))
    factor, info = potrf(m, lower=True, clean=True)
    if info > 0:
        raise NotPositiveDefiniteError(int(info))
    if info < 0:
        raise NumericalError(f"illegal value in argument {-info} of potrf", context="matrix_core")
    return factor


def factor_solve(factor: np.ndarray, rhs) -> np.ndarray:
    """Solve M·X = B given the lower Cholesky factor of M"""
    return linalg.cho_solve((factor, True), _as_complex(rhs, "right-hand side"))


def whiten(factor: np.ndarray, rhs) -> np.ndarray:
    """Return G⁻¹·B for a lower Cholesky factor G"""
    return linalg.solve_triangular(factor, _as_complex(rhs, "right-hand side"), lower=True)


def hermitian_solve(matrix, rhs) -> np.ndarray:
    """Solve M·X = B for Hermitian positive-definite M via its Cholesky factor"""
    return factor_solve(cholesky_lower(matrix), rhs)


def whiten_batch(matrices: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Batched G⁻¹·B where G is the lower Cholesky factor of each matrix in the stack"""
    try:
        factors = np.linalg.cholesky(matrices)
    except np.linalg.LinAlgError as exc:
        smallest = np.linalg.eigvalsh(matrices)[..., 0]
        bad = np.flatnonzero(smallest <= 0)
        where = f" (first at batch index {bad[0]})" if bad.size else ""
        raise NumericalError(
            f"{bad.size} of {len(matrices)} batched matrices are not positive definite{where}",
            context="matrix_core",
        ) from exc
    return np.linalg.solve(factors, rhs)


def projector(C) -> Tuple[np.ndarray, np.ndarray]:
    """Orthogonal projector onto the row space of C and its complement.

    Returns (P_C, P_C_perp) with P_C = Cᴴ(CCᴴ)⁻¹C and P_C_perp = I − P_C,
    both P×P.
    """
    c = np.atleast_2d(_as_complex(C, "C"))
    q, p = c.shape
    if q > p or np.linalg.matrix_rank(c) < q:
        raise RankError(f"C ({q}x{p}) does not have full row rank", context="matrix_core")

    gram = hermitian_part(c @ c.conj().T)
    proj = hermitian_part(c.conj().T @ hermitian_solve(gram, c))
    return proj, np.eye(p) - proj


def gram_inv_sqrt(C) -> np.ndarray:
    """(C·Cᴴ)^(−1/2) through an eigendecomposition of the Q×Q Gram matrix"""
    c = np.atleast_2d(_as_complex(C, "C"))
    gram = hermitian_part(c @ c.conj().T)
    eigenvalues, eigenvectors = np.linalg.eigh(gram)
    floor = np.finfo(float).eps * max(gram.shape) * max(float(eigenvalues[-1]), 0.0)
    if eigenvalues[0] <= floor:
        raise RankError(
            f"Gram matrix C·Cᴴ is not positive definite (smallest eigenvalue {eigenvalues[0]:.3e})",
            context="matrix_core",
        )
    return hermitian_part((eigenvectors * eigenvalues ** -0.5) @ eigenvectors.conj().T)


def sample_colored_gaussian(noise: "NoiseModel", cols: int, rng: np.random.Generator,
                            size: Optional[int] = None) -> np.ndarray:
    """Draw G·W with W i.i.d. circular complex Gaussian of unit variance.

    Returns an O×cols matrix, or a (size, O, cols) stack when size is given.
    Real parts are drawn before imaginary parts, so a fixed generator state
    gives identical output.
    """
    shape = (noise.n_channels, cols) if size is None else (size, noise.n_channels, cols)
    white = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return noise.factor @ white
