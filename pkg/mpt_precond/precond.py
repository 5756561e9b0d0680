from __future__ import annotations

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse

from mpt_precond.linalg import SpdFactorization, spd_factorize
from mpt_precond.system import (
    BlockOperator,
    NetworkParams,
    build_coupling,
    check_base_matrices,
    split_blocks,
)
from mpt_precond.transform import CongruenceTransform


logger = logging.getLogger(__name__)

DEFAULT_CACHE_ENTRIES = 16


class BlockFactorCache:
    """Factorizations of w_s·S + w_m·M for one (stiffness, mass) pair, keyed by (w_s, w_m)."""

    def __init__(
        self,
        stiffness: scipy.sparse.csr_matrix,
        mass: scipy.sparse.csr_matrix,
        *,
        max_entries: int = DEFAULT_CACHE_ENTRIES,
    ) -> None:
        if max_entries < 1:
            raise ValueError(f"cache must hold at least one factorization, got {max_entries}")
        check_base_matrices(stiffness, mass)
        self.stiffness = stiffness
        self.mass = mass
        self.max_entries = max_entries
        self._factors: "OrderedDict[Tuple[float, float], SpdFactorization]" = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._factors)

    def get(self, stiff_weight: float, mass_weight: float) -> SpdFactorization:
        key = (float(stiff_weight), float(mass_weight))
        with self._lock:
            cached = self._factors.get(key)
            if cached is not None:
                self._factors.move_to_end(key)
                self.hits += 1
                return cached
        factor = spd_factorize(key[0] * self.stiffness + key[1] * self.mass)
        with self._lock:
            self.misses += 1
            factor = self._factors.setdefault(key, factor)
            self._factors.move_to_end(key)
            while len(self._factors) > self.max_entries:
                self._factors.popitem(last=False)
            return factor


@dataclass(frozen=True)
class BlockDiagPrecond:
    """Exact inverse of diag(w_s,j·S + w_m,j·M), one factorization per network."""

    blocks: Tuple[SpdFactorization, ...]
    block_defs: Tuple[Tuple[float, float], ...]
    stiffness: scipy.sparse.csr_matrix = field(repr=False)
    mass: scipy.sparse.csr_matrix = field(repr=False)

    @property
    def j_count(self) -> int:
        return len(self.blocks)

    @property
    def block_size(self) -> int:
        return int(self.stiffness.shape[0])

    def apply(self, r: np.ndarray) -> np.ndarray:
        residual = split_blocks(r, self.j_count, self.block_size)
        solved = np.empty_like(residual)
        for index, factor in enumerate(self.blocks):
            solved[index] = factor.solve(residual[index])
        return solved.ravel()

    def as_operator(self) -> BlockOperator:
        """The preconditioner B itself (not its inverse) as a block operator."""
        weights = np.asarray(self.block_defs, dtype=np.float64)
        return BlockOperator(
            stiff_coeff=np.diag(weights[:, 0]),
            mass_coeff=np.diag(weights[:, 1]),
            stiffness=self.stiffness,
            mass=self.mass,
        )


def _build(
    weights: Sequence[Tuple[float, float]],
    stiffness: scipy.sparse.csr_matrix,
    mass: scipy.sparse.csr_matrix,
    cache: Optional[BlockFactorCache],
) -> BlockDiagPrecond:
    check_base_matrices(stiffness, mass)
    if cache is None:
        cache = BlockFactorCache(stiffness, mass)
    elif cache.stiffness is not stiffness or cache.mass is not mass:
        raise ValueError("factorization cache belongs to a different stiffness/mass pair")

    block_defs = tuple((float(ws), float(wm)) for ws, wm in weights)
    blocks = tuple(cache.get(ws, wm) for ws, wm in block_defs)
    logger.debug("Built block-diagonal preconditioner with blocks %s", block_defs)
    return BlockDiagPrecond(blocks=blocks, block_defs=block_defs, stiffness=stiffness, mass=mass)


def build_standard_precond(
    params: NetworkParams,
    stiffness: scipy.sparse.csr_matrix,
    mass: scipy.sparse.csr_matrix,
    *,
    cache: Optional[BlockFactorCache] = None,
) -> BlockDiagPrecond:
    """ℬ = diag(K_j·S + ξ_j·M) with ξ_j = Σ_i ξ_{j←i}."""
    coupling = build_coupling(params)
    weights = zip(params.k, coupling.xi_lumped)
    return _build(list(weights), stiffness, mass, cache)


def build_transformed_precond(
    ct: CongruenceTransform,
    stiffness: scipy.sparse.csr_matrix,
    mass: scipy.sparse.csr_matrix,
    *,
    cache: Optional[BlockFactorCache] = None,
) -> BlockDiagPrecond:
    """ℬ̃ = 𝒜̃ = diag(K̃_j·S + ξ̃_j·M)."""
    weights = zip(ct.k_tilde, ct.xi_tilde)
    return _build(list(weights), stiffness, mass, cache)


def apply_precond(precond: BlockDiagPrecond, r: np.ndarray) -> np.ndarray:
    return precond.apply(r)
