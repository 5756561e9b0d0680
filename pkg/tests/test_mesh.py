from pathlib import Path
import sys

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from mpt_precond.mesh import build_unit_square_mesh


def test_smallest_mesh_has_no_interior_vertices():
    mesh = build_unit_square_mesh(1)
    assert mesh.n_vertices == 4
    assert mesh.n_cells == 2
    assert mesh.n_boundary == 4
    assert mesh.n_interior == 0


@pytest.mark.parametrize("n", [1, 2, 3, 8, 17])
def test_counting_formulas(n):
    mesh = build_unit_square_mesh(n)
    assert mesh.n_vertices == (n + 1) ** 2
    assert mesh.n_cells == 2 * n * n
    assert mesh.n_boundary == 4 * n
    assert mesh.n_interior == (n - 1) ** 2
    assert mesh.h == pytest.approx(1.0 / n)


def test_n8_counts():
    mesh = build_unit_square_mesh(8)
    assert (mesh.n_vertices, mesh.n_cells, mesh.n_boundary, mesh.n_interior) == (81, 128, 32, 49)


@pytest.mark.parametrize("n", [1, 3, 10])
def test_cells_are_positive_and_tile_the_square(n):
    mesh = build_unit_square_mesh(n)
    areas = mesh.signed_areas()
    assert np.allclose(areas, 0.5 * mesh.h**2, rtol=1e-12, atol=0.0), "every cell should have area h²/2"
    assert abs(areas.sum() - 1.0) < 1e-12


def test_vertices_lie_in_the_unit_square_and_boundary_mask_matches():
    mesh = build_unit_square_mesh(5)
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    assert np.all((x >= 0.0) & (x <= 1.0) & (y >= 0.0) & (y <= 1.0))
    expected = np.isclose(x, 0.0) | np.isclose(x, 1.0) | np.isclose(y, 0.0) | np.isclose(y, 1.0)
    assert np.array_equal(mesh.boundary_mask, expected)


def test_vertices_are_row_major():
    mesh = build_unit_square_mesh(2)
    assert np.allclose(mesh.vertices[:3], [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])
    assert np.allclose(mesh.vertices[3], [0.0, 0.5])


def test_interior_vertices_belong_to_six_cells():
    mesh = build_unit_square_mesh(6)
    incidence = np.bincount(mesh.cells.ravel(), minlength=mesh.n_vertices)
    assert np.all(incidence[~mesh.boundary_mask] == 6)


def test_mesh_is_deterministic():
    first = build_unit_square_mesh(4)
    second = build_unit_square_mesh(4)
    assert np.array_equal(first.vertices, second.vertices)
    assert np.array_equal(first.cells, second.cells)


@pytest.mark.parametrize("n", [0, -3, 2.0, True, "4"])
def test_invalid_resolution_rejected(n):
    with pytest.raises(ValueError):
        build_unit_square_mesh(n)
