from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg


logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix expected to be symmetric positive definite is not."""


def as_csr(matrix: scipy.sparse.spmatrix | np.ndarray) -> scipy.sparse.csr_matrix:
    """Return a canonical CSR copy: sorted column indices, no duplicates."""
    csr = scipy.sparse.csr_matrix(matrix, dtype=np.float64)
    csr.sum_duplicates()
    csr.sort_indices()
    return csr


def is_symmetric(matrix: scipy.sparse.spmatrix | np.ndarray, tolerance: float = SYMMETRY_TOLERANCE) -> bool:
    if matrix.shape[0] != matrix.shape[1]:
        return False
    if scipy.sparse.issparse(matrix):
        scale = scipy.sparse.linalg.norm(matrix)
        defect = scipy.sparse.linalg.norm(matrix - matrix.T)
    else:
        dense = np.asarray(matrix, dtype=np.float64)
        scale = np.linalg.norm(dense)
        defect = np.linalg.norm(dense - dense.T)
    return defect <= tolerance * max(scale, np.finfo(float).tiny)


@dataclass(frozen=True)
class SpdFactorization:
    """Exact sparse factorization of an SPD matrix, reusable across right-hand sides.

    SuperLU runs with natural ordering and diagonal pivots only, so the factor is the
    LDLᵀ-shaped LU of the matrix and the signs of U's diagonal are the pivots.
    """

    matrix: scipy.sparse.csc_matrix
    lu: scipy.sparse.linalg.SuperLU

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=np.float64)
        if rhs.shape[0] != self.size:
            raise ValueError(f"right-hand side has {rhs.shape[0]} rows, factorization expects {self.size}")
        return self.lu.solve(rhs)


def spd_factorize(matrix: scipy.sparse.spmatrix | np.ndarray) -> SpdFactorization:
    """Factorize a sparse symmetric positive definite matrix."""
    csc = scipy.sparse.csc_matrix(matrix, dtype=np.float64)
    if csc.shape[0] != csc.shape[1]:
        raise ValueError(f"matrix must be square, got shape {csc.shape}")
    if csc.shape[0] == 0:
        raise ValueError("matrix must not be empty")
    if not is_symmetric(csc):
        raise ValueError("matrix is not symmetric")

    try:
        lu = scipy.sparse.linalg.splu(
            csc,
            permc_spec="NATURAL",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:
        raise NotPositiveDefiniteError(f"factorization failed: {exc}") from exc

    identity = np.arange(csc.shape[0])
    if not (np.array_equal(lu.perm_r, identity) and np.array_equal(lu.perm_c, identity)):
        raise NotPositiveDefiniteError("factorization required off-diagonal pivoting")
    pivots = lu.U.diagonal()
    if not np.all(pivots > 0.0):
        index = int(np.argmin(pivots))
        raise NotPositiveDefiniteError(f"non-positive pivot {float(pivots[index])!r} at row {index}")

    logger.debug("Factorized %dx%d SPD matrix (nnz L+U = %d)", csc.shape[0], csc.shape[1], lu.nnz)
    return SpdFactorization(matrix=csc, lu=lu)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so that its largest-magnitude entry is positive (first one on ties)."""
    fixed = vectors.copy()
    for column in range(fixed.shape[1]):
        magnitudes = np.abs(fixed[:, column])
        peak = magnitudes.max()
        if peak == 0.0:
            continue
        index = int(np.flatnonzero(magnitudes >= peak * (1.0 - 1e-12))[0])
        if fixed[index, column] < 0.0:
            fixed[:, column] *= -1.0
    return fixed


def dense_sym_eig(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a dense symmetric matrix.

    Returns ascending eigenvalues and an orthonormal eigenvector matrix with
    deterministic column signs.
    """
    dense = np.asarray(matrix, dtype=np.float64)
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {dense.shape}")
    if not np.all(np.isfinite(dense)):
        raise ValueError("matrix has non-finite entries")
    if not is_symmetric(dense):
        raise ValueError("matrix is not symmetric")

    if not np.any(dense):
        size = dense.shape[0]
        return np.zeros(size), np.eye(size)

    symmetric = 0.5 * (dense + dense.T)
    eigenvalues, eigenvectors = scipy.linalg.eigh(symmetric)
    return eigenvalues, _fix_signs(eigenvectors)


def _cholesky_lower(matrix: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.cholesky(matrix, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from exc


def reduce_generalized(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return L⁻¹ a L⁻ᵀ where b = L Lᵀ."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"shape mismatch between {a.shape} and {b.shape}")
    if not is_symmetric(a):
        raise ValueError("left matrix is not symmetric")
    if not is_symmetric(b):
        raise NotPositiveDefiniteError("right matrix is not symmetric")

    lower = _cholesky_lower(0.5 * (b + b.T))
    half = scipy.linalg.solve_triangular(lower, a, lower=True)
    reduced = scipy.linalg.solve_triangular(lower, half.T, lower=True).T
    return 0.5 * (reduced + reduced.T)


def generalized_sym_eig(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Ascending spectrum of b⁻¹a for symmetric a and SPD b."""
    return scipy.linalg.eigh(reduce_generalized(a, b), eigvals_only=True)


def tridiag_eig_extremes(alpha: Sequence[float], beta: Sequence[float]) -> Tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric tridiagonal matrix (Sturm bisection)."""
    diagonal = np.asarray(alpha, dtype=np.float64).ravel()
    off_diagonal = np.asarray(beta, dtype=np.float64).ravel()
    if diagonal.size == 0:
        raise ValueError("tridiagonal matrix must have at least one diagonal entry")
    if off_diagonal.size != diagonal.size - 1:
        raise ValueError(
            f"expected {diagonal.size - 1} off-diagonal entries, got {off_diagonal.size}"
        )
    if not (np.all(np.isfinite(diagonal)) and np.all(np.isfinite(off_diagonal))):
        raise ValueError("tridiagonal entries must be finite")
    if diagonal.size == 1:
        return float(diagonal[0]), float(diagonal[0])

    last = diagonal.size - 1
    lowest = scipy.linalg.eigvalsh_tridiagonal(
        diagonal, off_diagonal, select="i", select_range=(0, 0), lapack_driver="stebz"
    )
    highest = scipy.linalg.eigvalsh_tridiagonal(
        diagonal, off_diagonal, select="i", select_range=(last, last), lapack_driver="stebz"
    )
    return float(lowest[0]), float(highest[0])
