from __future__ import annotations

from typing import Optional, Tuple

import scipy.sparse

from mpt_precond.formulations.base import Formulation
from mpt_precond.formulations.standard import StandardFormulation
from mpt_precond.formulations.transformed import TransformedFormulation
from mpt_precond.precond import BlockFactorCache
from mpt_precond.system import NetworkParams


FORMULATIONS: Tuple[str, ...] = ("standard", "transformed")


def build_formulation(
    name: str,
    params: NetworkParams,
    stiffness: scipy.sparse.csr_matrix,
    mass: scipy.sparse.csr_matrix,
    *,
    cache: Optional[BlockFactorCache] = None,
) -> Formulation:
    if name == "standard":
        return StandardFormulation(params, stiffness, mass, cache=cache)
    if name == "transformed":
        return TransformedFormulation(params, stiffness, mass, cache=cache)
    raise ValueError(f"unknown formulation '{name}', expected one of {', '.join(FORMULATIONS)}")


__all__ = [
    "FORMULATIONS",
    "Formulation",
    "StandardFormulation",
    "TransformedFormulation",
    "build_formulation",
]
