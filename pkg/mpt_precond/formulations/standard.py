from __future__ import annotations

from typing import Optional

import scipy.sparse

from mpt_precond.formulations.base import Formulation
from mpt_precond.precond import BlockDiagPrecond, BlockFactorCache, build_standard_precond
from mpt_precond.system import BlockOperator, NetworkParams, assemble_standard


class StandardFormulation(Formulation):
    """Pressures p_j directly, preconditioned by diag(−K_jΔ + ξ_j)."""

    def __init__(
        self,
        params: NetworkParams,
        stiffness: scipy.sparse.csr_matrix,
        mass: scipy.sparse.csr_matrix,
        *,
        cache: Optional[BlockFactorCache] = None,
    ) -> None:
        super().__init__(
            "standard",
            params,
            stiffness,
            mass,
            display_name="Standard",
            cache=cache,
        )

    def build_operator(self) -> BlockOperator:
        return assemble_standard(self.params, self.stiffness, self.mass)

    def build_preconditioner(self) -> BlockDiagPrecond:
        return build_standard_precond(self.params, self.stiffness, self.mass, cache=self.cache)
