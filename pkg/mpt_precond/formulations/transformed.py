from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.sparse

from mpt_precond.formulations.base import Formulation
from mpt_precond.precond import BlockDiagPrecond, BlockFactorCache, build_transformed_precond
from mpt_precond.system import BlockOperator, NetworkParams
from mpt_precond.transform import (
    CongruenceTransform,
    assemble_transformed,
    diagonalize_by_congruence,
    recover_solution,
    transform_rhs,
)


class TransformedFormulation(Formulation):
    """Variables p̃ = T⁻¹p that decouple the networks; ℬ̃ equals 𝒜̃."""

    def __init__(
        self,
        params: NetworkParams,
        stiffness: scipy.sparse.csr_matrix,
        mass: scipy.sparse.csr_matrix,
        *,
        cache: Optional[BlockFactorCache] = None,
        transform: Optional[CongruenceTransform] = None,
    ) -> None:
        super().__init__(
            "transformed",
            params,
            stiffness,
            mass,
            display_name="Transformed",
            cache=cache,
        )
        self.transform = transform if transform is not None else diagonalize_by_congruence(params)
        if self.transform.j_count != params.j_count:
            raise ValueError(
                f"transform is {self.transform.j_count}x{self.transform.j_count}, expected J={params.j_count}"
            )

    def build_operator(self) -> BlockOperator:
        return assemble_transformed(self.transform, self.stiffness, self.mass)

    def build_preconditioner(self) -> BlockDiagPrecond:
        return build_transformed_precond(self.transform, self.stiffness, self.mass, cache=self.cache)

    def transform_rhs(self, g: np.ndarray) -> np.ndarray:
        return transform_rhs(self.transform, g)

    def recover_solution(self, x: np.ndarray) -> np.ndarray:
        return recover_solution(self.transform, x)
