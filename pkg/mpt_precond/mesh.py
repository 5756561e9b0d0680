from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StructuredMesh:
    """Uniform triangulation of the unit square with n subdivisions per side."""

    n: int
    vertices: np.ndarray
    cells: np.ndarray
    boundary_mask: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_cells(self) -> int:
        return int(self.cells.shape[0])

    @property
    def n_boundary(self) -> int:
        return int(np.count_nonzero(self.boundary_mask))

    @property
    def n_interior(self) -> int:
        return self.n_vertices - self.n_boundary

    def cell_coordinates(self) -> np.ndarray:
        """Return an array of shape (n_cells, 3, 2) with the corner coordinates of each cell."""
        return self.vertices[self.cells]

    def signed_areas(self) -> np.ndarray:
        corners = self.cell_coordinates()
        d1 = corners[:, 1] - corners[:, 0]
        d2 = corners[:, 2] - corners[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_unit_square_mesh(n: int) -> StructuredMesh:
    """Build the (n+1)² vertex grid of [0,1]², two counter-clockwise triangles per square.

    Vertices are numbered row-major (x fastest). Every square is cut along its
    lower-left to upper-right diagonal.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ValueError(f"mesh resolution must be an integer, got {n!r}")
    if n < 1:
        raise ValueError(f"mesh resolution must be >= 1, got {n}")
    n = int(n)

    coords = np.linspace(0.0, 1.0, n + 1)
    xs, ys = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([xs.ravel(), ys.ravel()])

    stride = n + 1
    jj, ii = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    lower_left = (jj * stride + ii).ravel()
    lower_right = lower_left + 1
    upper_left = lower_left + stride
    upper_right = upper_left + 1

    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    cells[0::2] = np.column_stack([lower_left, lower_right, upper_right])
    cells[1::2] = np.column_stack([lower_left, upper_right, upper_left])

    x, y = vertices[:, 0], vertices[:, 1]
    boundary_mask = (x == 0.0) | (x == 1.0) | (y == 0.0) | (y == 1.0)

    return StructuredMesh(n=n, vertices=vertices, cells=cells, boundary_mask=boundary_mask)
