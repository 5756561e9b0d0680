from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse


MAX_DENSE_DIMENSION = 2048


class DimensionMismatchError(ValueError):
    """Raised when vectors or matrices do not fit the block structure."""


class OracleSizeError(ValueError):
    """Raised when a dense materialization would exceed the size guard."""


@dataclass(frozen=True)
class NetworkParams:
    """Permeabilities K_j and the symmetric exchange matrix ξ_{j←i} (zero diagonal)."""

    k: np.ndarray
    xi: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "k", np.array(self.k, dtype=np.float64).ravel())
        object.__setattr__(self, "xi", np.array(self.xi, dtype=np.float64))

    @property
    def j_count(self) -> int:
        return int(self.k.size)

    @classmethod
    def from_pairs(
        cls,
        k: Sequence[float],
        pairs: Optional[Mapping[Tuple[int, int], float]] = None,
    ) -> NetworkParams:
        """Build parameters from 1-based network pairs, e.g. {(1, 2): 1e4}."""
        j_count = len(k)
        xi = np.zeros((j_count, j_count))
        for (first, second), value in (pairs or {}).items():
            if not (1 <= first <= j_count and 1 <= second <= j_count) or first == second:
                raise ValueError(f"invalid network pair {first}-{second} for J={j_count}")
            xi[first - 1, second - 1] = value
            xi[second - 1, first - 1] = value
        params = cls(k=np.asarray(k, dtype=np.float64), xi=xi)
        params.validate()
        return params

    def pairs(self) -> Tuple[Tuple[Tuple[int, int], float], ...]:
        """Upper-triangle exchange coefficients as ((i, j), ξ) with 1-based i < j."""
        return tuple(
            ((first + 1, second + 1), float(self.xi[first, second]))
            for first in range(self.j_count)
            for second in range(first + 1, self.j_count)
        )

    def validate(self) -> None:
        j_count = self.j_count
        if j_count < 1:
            raise ValueError("at least one network is required")
        if not np.all(np.isfinite(self.k)) or not np.all(self.k > 0.0):
            raise ValueError(f"permeabilities must be positive and finite, got {self.k.tolist()}")
        if self.xi.shape != (j_count, j_count):
            raise ValueError(f"exchange matrix must be {j_count}x{j_count}, got {self.xi.shape}")
        if not np.all(np.isfinite(self.xi)):
            raise ValueError("exchange coefficients must be finite")
        if np.any(np.diag(self.xi) != 0.0):
            raise ValueError("self-exchange coefficients must be zero")
        if np.any(self.xi < 0.0):
            raise ValueError("exchange coefficients must be non-negative")
        if not np.array_equal(self.xi, self.xi.T):
            raise ValueError("exchange coefficients must be symmetric")


@dataclass(frozen=True)
class CouplingMatrices:
    k_diag: np.ndarray
    e: np.ndarray
    xi_lumped: np.ndarray


def build_coupling(params: NetworkParams) -> CouplingMatrices:
    """K = diag(K_j) and the graph-Laplacian exchange matrix E."""
    params.validate()
    xi_lumped = params.xi.sum(axis=1)
    e = np.diag(xi_lumped) - params.xi
    return CouplingMatrices(k_diag=np.diag(params.k), e=e, xi_lumped=xi_lumped)


@dataclass(frozen=True)
class BlockOperator:
    """Matrix-free J×J block operator.

    Block (j, i) is stiff_coeff[j, i]·stiffness + mass_coeff[j, i]·mass; vectors are
    stacked network by network.
    """

    stiff_coeff: np.ndarray
    mass_coeff: np.ndarray
    stiffness: scipy.sparse.csr_matrix = field(repr=False)
    mass: scipy.sparse.csr_matrix = field(repr=False)

    def __post_init__(self) -> None:
        stiff_coeff = np.array(self.stiff_coeff, dtype=np.float64)
        mass_coeff = np.array(self.mass_coeff, dtype=np.float64)
        if stiff_coeff.ndim != 2 or stiff_coeff.shape[0] != stiff_coeff.shape[1]:
            raise DimensionMismatchError(f"coefficient matrix must be square, got {stiff_coeff.shape}")
        if mass_coeff.shape != stiff_coeff.shape:
            raise DimensionMismatchError(
                f"coefficient shapes differ: {stiff_coeff.shape} vs {mass_coeff.shape}"
            )
        check_base_matrices(self.stiffness, self.mass)
        object.__setattr__(self, "stiff_coeff", stiff_coeff)
        object.__setattr__(self, "mass_coeff", mass_coeff)

    @property
    def j_count(self) -> int:
        return int(self.stiff_coeff.shape[0])

    @property
    def block_size(self) -> int:
        return int(self.stiffness.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        size = self.j_count * self.block_size
        return size, size

    def is_block_diagonal(self) -> bool:
        off = ~np.eye(self.j_count, dtype=bool)
        return not (np.any(self.stiff_coeff[off]) or np.any(self.mass_coeff[off]))

    def apply(self, x: np.ndarray) -> np.ndarray:
        blocks = split_blocks(x, self.j_count, self.block_size)
        stiff_part = self.stiffness @ blocks.T
        mass_part = self.mass @ blocks.T
        result = stiff_part @ self.stiff_coeff.T + mass_part @ self.mass_coeff.T
        return np.ascontiguousarray(result.T).ravel()

    def block(self, row: int, col: int) -> scipy.sparse.csr_matrix:
        return (
            self.stiff_coeff[row, col] * self.stiffness + self.mass_coeff[row, col] * self.mass
        ).tocsr()

    def materialize_dense(self, max_dimension: int = MAX_DENSE_DIMENSION) -> np.ndarray:
        return materialize_dense(self, max_dimension=max_dimension)


def check_base_matrices(stiffness: scipy.sparse.spmatrix, mass: scipy.sparse.spmatrix) -> None:
    if stiffness.shape[0] != stiffness.shape[1]:
        raise DimensionMismatchError(f"stiffness must be square, got {stiffness.shape}")
    if stiffness.shape != mass.shape:
        raise DimensionMismatchError(
            f"stiffness {stiffness.shape} and mass {mass.shape} come from different spaces"
        )


def split_blocks(x: np.ndarray, j_count: int, block_size: int) -> np.ndarray:
    """View a stacked vector as a (J, block_size) array."""
    vector = np.asarray(x, dtype=np.float64)
    if vector.shape != (j_count * block_size,):
        raise DimensionMismatchError(
            f"expected a vector of length {j_count * block_size}, got shape {vector.shape}"
        )
    return vector.reshape(j_count, block_size)


def apply(op: BlockOperator, x: np.ndarray) -> np.ndarray:
    return op.apply(x)


def materialize_dense(op: BlockOperator, max_dimension: int = MAX_DENSE_DIMENSION) -> np.ndarray:
    size = op.shape[0]
    if size > max_dimension:
        raise OracleSizeError(f"dense materialization of size {size} exceeds the limit {max_dimension}")
    stiffness = op.stiffness.toarray()
    mass = op.mass.toarray()
    return np.kron(op.stiff_coeff, stiffness) + np.kron(op.mass_coeff, mass)


def assemble_standard(
    params: NetworkParams,
    stiffness: scipy.sparse.csr_matrix,
    mass: scipy.sparse.csr_matrix,
) -> BlockOperator:
    """𝒜 = 𝒦 + E: diagonal blocks K_j·S + E_jj·M, off-diagonal blocks E_ji·M."""
    coupling = build_coupling(params)
    return BlockOperator(
        stiff_coeff=coupling.k_diag,
        mass_coeff=coupling.e,
        stiffness=stiffness,
        mass=mass,
    )


def exchange_energy(params: NetworkParams, mass: scipy.sparse.spmatrix, x: np.ndarray) -> float:
    """½ Σ_j Σ_i ξ_{j←i} ‖p_j − p_i‖²_M."""
    blocks = split_blocks(x, params.j_count, mass.shape[0])
    total = 0.0
    for j, i in _pairs(params.j_count):
        weight = params.xi[j, i]
        if weight == 0.0:
            continue
        difference = blocks[j] - blocks[i]
        total += 0.5 * weight * float(difference @ (mass @ difference))
    return total


def _pairs(j_count: int) -> Iterable[Tuple[int, int]]:
    for j in range(j_count):
        for i in range(j_count):
            yield j, i
