from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from mpt_precond.linalg import as_csr
from mpt_precond.mesh import StructuredMesh


# (area / 12) * MASS_REFERENCE is the consistent P1 element mass matrix.
MASS_REFERENCE = np.array(
    [
        [2.0, 1.0, 1.0],
        [1.0, 2.0, 1.0],
        [1.0, 1.0, 2.0],
    ]
)


@dataclass(frozen=True)
class DofMap:
    """Vertices carrying unknowns; boundary vertices are eliminated for p = 0 on ∂Ω."""

    n_vertices: int
    interior_dofs: np.ndarray

    @property
    def n_interior(self) -> int:
        return int(self.interior_dofs.size)


def build_dof_map(mesh: StructuredMesh, *, include_boundary: bool = False) -> DofMap:
    if include_boundary:
        dofs = np.arange(mesh.n_vertices)
    else:
        dofs = np.flatnonzero(~mesh.boundary_mask)
    return DofMap(n_vertices=mesh.n_vertices, interior_dofs=dofs)


def _check_inputs(mesh: StructuredMesh, dofs: DofMap) -> None:
    if dofs.n_vertices != mesh.n_vertices:
        raise ValueError(
            f"dof map was built for {dofs.n_vertices} vertices, mesh has {mesh.n_vertices}"
        )
    if dofs.n_interior == 0:
        raise ValueError(f"mesh with n={mesh.n} has no interior degrees of freedom")


def _p1_gradients(mesh: StructuredMesh) -> tuple[np.ndarray, np.ndarray]:
    """Return cell areas and barycentric basis gradients of shape (n_cells, 3, 2)."""
    corners = mesh.cell_coordinates()
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(det <= 0.0):
        raise ValueError("mesh contains degenerate or clockwise cells")

    grads = np.empty((mesh.n_cells, 3, 2))
    grads[:, 1, 0] = d2[:, 1] / det
    grads[:, 1, 1] = -d2[:, 0] / det
    grads[:, 2, 0] = -d1[:, 1] / det
    grads[:, 2, 1] = d1[:, 0] / det
    grads[:, 0] = -(grads[:, 1] + grads[:, 2])
    return 0.5 * det, grads


def _assemble(mesh: StructuredMesh, dofs: DofMap, local: np.ndarray) -> scipy.sparse.csr_matrix:
    rows = np.repeat(mesh.cells, 3, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, 3)).ravel()
    full = scipy.sparse.coo_matrix(
        (local.ravel(), (rows, cols)),
        shape=(mesh.n_vertices, mesh.n_vertices),
    ).tocsr()
    index = dofs.interior_dofs
    restricted = as_csr(full[index][:, index])
    restricted.eliminate_zeros()
    return restricted


def assemble_stiffness(mesh: StructuredMesh, dofs: DofMap) -> scipy.sparse.csr_matrix:
    """∫ ∇φ_i · ∇φ_j over the restricted P1 space."""
    _check_inputs(mesh, dofs)
    areas, grads = _p1_gradients(mesh)
    local = areas[:, None, None] * np.einsum("cad,cbd->cab", grads, grads)
    return _assemble(mesh, dofs, local)


def assemble_mass(mesh: StructuredMesh, dofs: DofMap) -> scipy.sparse.csr_matrix:
    """Consistent ∫ φ_i φ_j over the restricted P1 space."""
    _check_inputs(mesh, dofs)
    areas, _ = _p1_gradients(mesh)
    local = (areas / 12.0)[:, None, None] * MASS_REFERENCE[None, :, :]
    return _assemble(mesh, dofs, local)


def l2_inner(mass: scipy.sparse.spmatrix, u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    size = mass.shape[0]
    if u.shape != (size,) or v.shape != (size,):
        raise ValueError(f"expected vectors of length {size}, got {u.shape} and {v.shape}")
    return float(u @ (mass @ v))
