from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.sparse

from mpt_precond.fem import assemble_mass, assemble_stiffness, build_dof_map
from mpt_precond.formulations import build_formulation
from mpt_precond.linalg import generalized_sym_eig
from mpt_precond.mesh import build_unit_square_mesh
from mpt_precond.system import (
    MAX_DENSE_DIMENSION,
    NetworkParams,
    OracleSizeError,
    build_coupling,
)


@dataclass(frozen=True)
class TheoryBounds:
    """Coercivity α = ½·min(1, min_j C_Ω K_j/ξ_j), continuity β = J+1."""

    alpha: float
    beta: float
    c_omega: float
    cond_bound: float


@dataclass(frozen=True)
class OracleReport:
    formulation: str
    n: int
    dimension: int
    lambda_min: float
    lambda_max: float
    cond: float
    c_omega: float
    bounds: TheoryBounds
    closed_form_cond: Optional[float] = None


def _guard(size: int, max_dimension: int) -> None:
    if size > max_dimension:
        raise OracleSizeError(f"dense oracle of size {size} exceeds the limit {max_dimension}")


def discrete_poincare_constant(
    stiffness: scipy.sparse.spmatrix,
    mass: scipy.sparse.spmatrix,
    *,
    max_dimension: int = MAX_DENSE_DIMENSION,
) -> float:
    """Smallest generalized eigenvalue of S v = λ M v, the sharp discrete C_Ω."""
    _guard(stiffness.shape[0], max_dimension)
    return float(generalized_sym_eig(stiffness.toarray(), mass.toarray())[0])


def exact_preconditioned_condition(
    a_dense: np.ndarray,
    b_dense: np.ndarray,
    *,
    max_dimension: int = MAX_DENSE_DIMENSION,
) -> Tuple[float, float, float]:
    _guard(np.asarray(a_dense).shape[0], max_dimension)
    spectrum = generalized_sym_eig(a_dense, b_dense)
    lambda_min, lambda_max = float(spectrum[0]), float(spectrum[-1])
    return lambda_min, lambda_max, lambda_max / lambda_min


def theoretical_bounds(params: NetworkParams, c_omega: float) -> TheoryBounds:
    """Networks without exchange (ξ_j = 0) drop out of the inner minimum."""
    if not c_omega > 0.0:
        raise ValueError(f"Poincaré constant must be positive, got {c_omega}")
    xi_lumped = build_coupling(params).xi_lumped
    ratio = 1.0
    for k_j, xi_j in zip(params.k, xi_lumped):
        if xi_j > 0.0:
            ratio = min(ratio, c_omega * k_j / xi_j)
    alpha = 0.5 * ratio
    beta = float(params.j_count + 1)
    return TheoryBounds(alpha=alpha, beta=beta, c_omega=float(c_omega), cond_bound=beta / alpha)


def two_network_condition(lambda_min_h: float, xi: float) -> float:
    """Exact cond(ℬ⁻¹𝒜) of the standard formulation for J = 2, K₁ = K₂ = 1."""
    return (lambda_min_h + 2.0 * xi) / lambda_min_h


def poisson_unit_load_peak(terms: int = 199) -> float:
    """Peak of −Δu = 1, u = 0 on ∂[0,1]², from the double sine series at (½, ½)."""
    total = 0.0
    for m in range(1, terms + 1, 2):
        sign_m = -1.0 if (m // 2) % 2 else 1.0
        for n in range(1, terms + 1, 2):
            sign_n = -1.0 if (n // 2) % 2 else 1.0
            total += sign_m * sign_n / (m * n * (m * m + n * n))
    return 16.0 / math.pi**4 * total


def analyse_configuration(
    params: NetworkParams,
    n: int,
    formulation: str = "standard",
    *,
    max_dimension: int = MAX_DENSE_DIMENSION,
) -> OracleReport:
    """Exact spectrum of the preconditioned operator on a small mesh, with theory bounds."""
    mesh = build_unit_square_mesh(n)
    dofs = build_dof_map(mesh)
    stiffness = assemble_stiffness(mesh, dofs)
    mass = assemble_mass(mesh, dofs)
    dimension = params.j_count * dofs.n_interior
    _guard(dimension, max_dimension)

    chosen = build_formulation(formulation, params, stiffness, mass)
    a_dense = chosen.operator().materialize_dense(max_dimension)
    b_dense = chosen.preconditioner().as_operator().materialize_dense(max_dimension)
    lambda_min, lambda_max, cond = exact_preconditioned_condition(
        a_dense, b_dense, max_dimension=max_dimension
    )

    c_omega = discrete_poincare_constant(stiffness, mass, max_dimension=max_dimension)
    closed_form = None
    if formulation == "standard" and params.j_count == 2 and params.k[0] == params.k[1] == 1.0:
        closed_form = two_network_condition(c_omega, float(params.xi[0, 1]))

    return OracleReport(
        formulation=formulation,
        n=n,
        dimension=dimension,
        lambda_min=lambda_min,
        lambda_max=lambda_max,
        cond=cond,
        c_omega=c_omega,
        bounds=theoretical_bounds(params, c_omega),
        closed_form_cond=closed_form,
    )
