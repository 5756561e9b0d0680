from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.sparse

from mpt_precond.linalg import dense_sym_eig
from mpt_precond.system import (
    BlockOperator,
    DimensionMismatchError,
    NetworkParams,
    build_coupling,
    split_blocks,
)


logger = logging.getLogger(__name__)

ZERO_EIGENVALUE_FACTOR = 16.0


@dataclass(frozen=True)
class CongruenceTransform:
    """T with TᵀKT = diag(k_tilde) and TᵀET = diag(xi_tilde) up to the stored residuals."""

    t: np.ndarray
    k_tilde: np.ndarray
    xi_tilde: np.ndarray
    residual_k: float
    residual_e: float

    @property
    def j_count(self) -> int:
        return int(self.t.shape[0])

    def relative_residuals(self) -> Tuple[float, float]:
        """Residuals scaled by the norms of the transformed diagonals."""
        tiny = np.finfo(float).tiny
        scale_k = max(float(np.linalg.norm(self.k_tilde)), tiny)
        scale_e = float(np.linalg.norm(self.xi_tilde))
        relative_e = self.residual_e / scale_e if scale_e > 0.0 else self.residual_e
        return self.residual_k / scale_k, relative_e


def _off_diagonal_norm(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix - np.diag(np.diag(matrix))))


def verify_congruence(t: np.ndarray, params: NetworkParams) -> Tuple[float, float]:
    """Off-diagonal Frobenius norms of TᵀKT and TᵀET for any candidate T."""
    t = np.asarray(t, dtype=np.float64)
    j_count = params.j_count
    if t.shape != (j_count, j_count):
        raise DimensionMismatchError(f"transform must be {j_count}x{j_count}, got {t.shape}")
    coupling = build_coupling(params)
    return (
        _off_diagonal_norm(t.T @ coupling.k_diag @ t),
        _off_diagonal_norm(t.T @ coupling.e @ t),
    )


def _from_matrix(t: np.ndarray, params: NetworkParams, xi_tilde: np.ndarray | None = None) -> CongruenceTransform:
    coupling = build_coupling(params)
    k_tilde = np.diag(t.T @ coupling.k_diag @ t).copy()
    if xi_tilde is None:
        xi_tilde = np.diag(t.T @ coupling.e @ t).copy()
    residual_k, residual_e = verify_congruence(t, params)
    return CongruenceTransform(
        t=t,
        k_tilde=k_tilde,
        xi_tilde=np.clip(xi_tilde, 0.0, None),
        residual_k=residual_k,
        residual_e=residual_e,
    )


def diagonalize_by_congruence(params: NetworkParams) -> CongruenceTransform:
    """Canonical T = K^{-1/2} Q with Q the eigenvectors of S = K^{-1/2} E K^{-1/2}.

    TᵀKT is the identity and TᵀET holds the eigenvalues of K⁻¹E in ascending order.
    Repeated eigenvalues need no special treatment.
    """
    params.validate()
    coupling = build_coupling(params)
    scale = 1.0 / np.sqrt(params.k)

    if not np.any(params.xi):
        return _from_matrix(np.diag(scale), params, xi_tilde=np.zeros(params.j_count))

    s = coupling.e * np.outer(scale, scale)
    eigenvalues, q = dense_sym_eig(s)
    # E has zero row sums, so S is singular; snap round-off around zero.
    noise = ZERO_EIGENVALUE_FACTOR * params.j_count * np.finfo(float).eps * np.abs(eigenvalues).max()
    eigenvalues = np.where(np.abs(eigenvalues) <= noise, 0.0, eigenvalues)
    t = scale[:, None] * q
    ct = _from_matrix(t, params, xi_tilde=eigenvalues)
    logger.debug(
        "Congruence transform for J=%d: xi_tilde=%s residuals=(%.3e, %.3e)",
        params.j_count,
        ct.xi_tilde.tolist(),
        ct.residual_k,
        ct.residual_e,
    )
    return ct


def explicit_two_network_transform(params: NetworkParams) -> CongruenceTransform:
    """Closed-form, unnormalised eigenvector matrix of K⁻¹E for two networks.

    The columns are the eigenvectors for 0 and ξ(K₁+K₂)/(K₁K₂); requires ξ_{1←2} > 0.
    """
    params.validate()
    if params.j_count != 2:
        raise ValueError(f"explicit transform is defined for two networks, got J={params.j_count}")
    k1, k2 = params.k
    xi = params.xi[0, 1]
    if xi <= 0.0:
        raise ValueError("explicit transform requires a positive exchange coefficient")
    t = np.array([[1.0, -k2 / k1], [1.0, 1.0]])
    return _from_matrix(t, params)


def transform_rhs(ct: CongruenceTransform, g: np.ndarray) -> np.ndarray:
    """g̃ = Tᵀg applied across the network index at every dof."""
    vector = np.asarray(g, dtype=np.float64)
    block_size = _block_size(vector, ct.j_count)
    blocks = split_blocks(vector, ct.j_count, block_size)
    return (ct.t.T @ blocks).ravel()


def recover_solution(ct: CongruenceTransform, p_tilde: np.ndarray) -> np.ndarray:
    """p = T p̃."""
    vector = np.asarray(p_tilde, dtype=np.float64)
    block_size = _block_size(vector, ct.j_count)
    blocks = split_blocks(vector, ct.j_count, block_size)
    return (ct.t @ blocks).ravel()


def _block_size(vector: np.ndarray, j_count: int) -> int:
    if vector.ndim != 1 or vector.size % j_count != 0:
        raise DimensionMismatchError(
            f"vector of shape {vector.shape} does not split into {j_count} equal blocks"
        )
    return vector.size // j_count


def assemble_transformed(
    ct: CongruenceTransform,
    stiffness: scipy.sparse.csr_matrix,
    mass: scipy.sparse.csr_matrix,
) -> BlockOperator:
    """𝒜̃ = diag(K̃_j·S + ξ̃_j·M); off-diagonal blocks vanish."""
    return BlockOperator(
        stiff_coeff=np.diag(ct.k_tilde),
        mass_coeff=np.diag(ct.xi_tilde),
        stiffness=stiffness,
        mass=mass,
    )
