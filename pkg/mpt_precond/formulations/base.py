from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np
import scipy.sparse

from mpt_precond.precond import BlockDiagPrecond, BlockFactorCache
from mpt_precond.system import BlockOperator, NetworkParams, check_base_matrices


class Formulation(ABC):
    """One discrete formulation of the coupled network problem and its preconditioner."""

    name: str

    def __init__(
        self,
        name: str,
        params: NetworkParams,
        stiffness: scipy.sparse.csr_matrix,
        mass: scipy.sparse.csr_matrix,
        *,
        display_name: Optional[str] = None,
        cache: Optional[BlockFactorCache] = None,
    ) -> None:
        params.validate()
        check_base_matrices(stiffness, mass)
        self.name = name
        self.display_name = display_name or name
        self.params = params
        self.stiffness = stiffness
        self.mass = mass
        self.cache = cache if cache is not None else BlockFactorCache(stiffness, mass)
        self._operator: Optional[BlockOperator] = None
        self._preconditioner: Optional[BlockDiagPrecond] = None

    @property
    def dimension(self) -> int:
        return self.params.j_count * int(self.stiffness.shape[0])

    def operator(self) -> BlockOperator:
        if self._operator is None:
            self._operator = self.build_operator()
        return self._operator

    def preconditioner(self) -> BlockDiagPrecond:
        if self._preconditioner is None:
            self._preconditioner = self.build_preconditioner()
        return self._preconditioner

    @abstractmethod
    def build_operator(self) -> BlockOperator:
        """Assemble the block operator solved by CG."""

    @abstractmethod
    def build_preconditioner(self) -> BlockDiagPrecond:
        """Factorize the block-diagonal preconditioner paired with the operator."""

    def transform_rhs(self, g: np.ndarray) -> np.ndarray:
        """Map physical loads into the variables the operator acts on."""
        return np.asarray(g, dtype=np.float64)

    def recover_solution(self, x: np.ndarray) -> np.ndarray:
        """Map a solution of the operator back to network pressures."""
        return np.asarray(x, dtype=np.float64)
