from pathlib import Path
import sys

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from mpt_precond.fem import assemble_mass, assemble_stiffness, build_dof_map
from mpt_precond.linalg import dense_sym_eig
from mpt_precond.mesh import build_unit_square_mesh
from mpt_precond.oracle import discrete_poincare_constant, theoretical_bounds
from mpt_precond.precond import build_standard_precond
from mpt_precond.system import (
    BlockOperator,
    DimensionMismatchError,
    NetworkParams,
    OracleSizeError,
    apply,
    assemble_standard,
    build_coupling,
    exchange_energy,
    materialize_dense,
    split_blocks,
)


def base_matrices(n):
    mesh = build_unit_square_mesh(n)
    dofs = build_dof_map(mesh)
    return assemble_stiffness(mesh, dofs), assemble_mass(mesh, dofs)


def test_params_from_pairs_is_symmetric():
    params = NetworkParams.from_pairs([1.0, 2.0, 3.0], {(1, 2): 5.0, (3, 2): 7.0})
    assert params.j_count == 3
    assert params.xi[0, 1] == params.xi[1, 0] == 5.0
    assert params.xi[1, 2] == params.xi[2, 1] == 7.0
    assert params.pairs() == (((1, 2), 5.0), ((1, 3), 0.0), ((2, 3), 7.0))


@pytest.mark.parametrize(
    "k, xi",
    [
        ([0.0, 1.0], np.zeros((2, 2))),
        ([-1.0], np.zeros((1, 1))),
        ([1.0, 1.0], np.array([[0.0, 1.0], [2.0, 0.0]])),
        ([1.0, 1.0], np.array([[0.0, -1.0], [-1.0, 0.0]])),
        ([1.0, 1.0], np.array([[1.0, 0.0], [0.0, 0.0]])),
        ([1.0, 1.0], np.zeros((3, 3))),
        ([np.inf], np.zeros((1, 1))),
    ],
)
def test_invalid_params_rejected(k, xi):
    with pytest.raises(ValueError):
        NetworkParams(k=k, xi=xi).validate()


def test_invalid_pair_rejected():
    with pytest.raises(ValueError):
        NetworkParams.from_pairs([1.0, 1.0], {(1, 3): 1.0})


def test_coupling_two_networks():
    coupling = build_coupling(NetworkParams.from_pairs([1.0, 1.0], {(1, 2): 3.0}))
    assert np.array_equal(coupling.e, [[3.0, -3.0], [-3.0, 3.0]])
    assert np.array_equal(coupling.xi_lumped, [3.0, 3.0])


def test_coupling_single_network():
    coupling = build_coupling(NetworkParams.from_pairs([2.0]))
    assert np.array_equal(coupling.e, [[0.0]])
    assert np.array_equal(coupling.xi_lumped, [0.0])
    assert np.array_equal(coupling.k_diag, [[2.0]])


def test_coupling_complete_graph_spectrum():
    params = NetworkParams.from_pairs([1.0, 1.0, 1.0], {(1, 2): 1.0, (1, 3): 1.0, (2, 3): 1.0})
    coupling = build_coupling(params)
    assert np.array_equal(coupling.e, [[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]])
    values, _ = dense_sym_eig(coupling.e)
    assert np.allclose(values, [0.0, 3.0, 3.0], atol=1e-14)


def test_coupling_rows_sum_to_zero_and_semidefinite():
    rng = np.random.default_rng(11)
    upper = np.triu(rng.uniform(0.0, 10.0, (5, 5)), 1)
    params = NetworkParams(k=np.ones(5), xi=upper + upper.T)
    coupling = build_coupling(params)
    assert np.allclose(coupling.e.sum(axis=1), 0.0, atol=1e-12)
    assert np.linalg.eigvalsh(coupling.e).min() > -1e-12


def test_single_network_without_exchange_is_stiffness():
    stiffness, mass = base_matrices(4)
    op = assemble_standard(NetworkParams.from_pairs([1.0]), stiffness, mass)
    assert np.allclose(op.materialize_dense(), stiffness.toarray())


def test_two_uncoupled_networks_are_block_diagonal():
    stiffness, mass = base_matrices(4)
    op = assemble_standard(NetworkParams.from_pairs([1.0, 1.0]), stiffness, mass)
    assert op.is_block_diagonal()
    dense = op.materialize_dense()
    size = stiffness.shape[0]
    assert np.allclose(dense[:size, :size], stiffness.toarray())
    assert np.allclose(dense[size:, size:], stiffness.toarray())
    assert not np.any(dense[:size, size:])


def test_quadratic_form_splits_into_diffusion_and_exchange():
    stiffness, mass = base_matrices(5)
    params = NetworkParams.from_pairs([1.0, 1.0], {(1, 2): 1.0})
    op = assemble_standard(params, stiffness, mass)
    x = np.random.default_rng(5).standard_normal(op.shape[0])
    p1, p2 = split_blocks(x, 2, stiffness.shape[0])
    expected = p1 @ (stiffness @ p1) + p2 @ (stiffness @ p2) + (p1 - p2) @ (mass @ (p1 - p2))
    assert x @ op.apply(x) == pytest.approx(expected, rel=1e-12)


def test_apply_is_linear_and_matches_dense():
    stiffness, mass = base_matrices(4)
    params = NetworkParams.from_pairs([2.0, 0.5], {(1, 2): 30.0})
    op = assemble_standard(params, stiffness, mass)
    rng = np.random.default_rng(9)
    x, y = rng.standard_normal((2, op.shape[0]))
    assert np.array_equal(apply(op, np.zeros(op.shape[0])), np.zeros(op.shape[0]))
    assert np.allclose(op.apply(2.0 * x - 3.0 * y), 2.0 * op.apply(x) - 3.0 * op.apply(y), atol=1e-12)
    dense = materialize_dense(op)
    assert np.linalg.norm(dense @ x - op.apply(x)) <= 1e-13 * np.linalg.norm(dense @ x)


def test_block_accessor():
    stiffness, mass = base_matrices(3)
    op = assemble_standard(NetworkParams.from_pairs([2.0, 1.0], {(1, 2): 4.0}), stiffness, mass)
    assert np.allclose(op.block(0, 0).toarray(), (2.0 * stiffness + 4.0 * mass).toarray())
    assert np.allclose(op.block(0, 1).toarray(), (-4.0 * mass).toarray())


def test_operator_is_symmetric():
    stiffness, mass = base_matrices(6)
    params = NetworkParams.from_pairs([1.0, 1e-3, 10.0], {(1, 2): 1e2, (2, 3): 5.0})
    op = assemble_standard(params, stiffness, mass)
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal((2, op.shape[0]))
    left, right = op.apply(x) @ y, x @ op.apply(y)
    assert abs(left - right) <= 1e-12 * max(abs(left), 1.0)


def test_identity_and_zero_coefficients():
    stiffness, mass = base_matrices(3)
    identity = BlockOperator(np.eye(2), np.zeros((2, 2)), stiffness, mass).materialize_dense()
    assert np.allclose(identity, np.kron(np.eye(2), stiffness.toarray()))
    zero = BlockOperator(np.zeros((2, 2)), np.zeros((2, 2)), stiffness, mass).materialize_dense()
    assert not np.any(zero)


def test_size_guard_refuses_large_materialization():
    stiffness, mass = base_matrices(8)
    op = assemble_standard(NetworkParams.from_pairs([1.0, 1.0]), stiffness, mass)
    with pytest.raises(OracleSizeError):
        op.materialize_dense(max_dimension=50)


def test_dimension_errors():
    stiffness, mass = base_matrices(4)
    small_stiffness, _ = base_matrices(3)
    op = assemble_standard(NetworkParams.from_pairs([1.0, 1.0]), stiffness, mass)
    with pytest.raises(DimensionMismatchError):
        op.apply(np.zeros(op.shape[0] + 1))
    with pytest.raises(DimensionMismatchError):
        assemble_standard(NetworkParams.from_pairs([1.0]), small_stiffness, mass)
    with pytest.raises(DimensionMismatchError):
        BlockOperator(np.eye(2), np.eye(3), stiffness, mass)


def test_exchange_energy_identity():
    stiffness, mass = base_matrices(5)
    rng = np.random.default_rng(17)
    upper = np.triu(rng.uniform(0.0, 1e3, (3, 3)), 1)
    params = NetworkParams(k=np.ones(3), xi=upper + upper.T)
    exchange_only = BlockOperator(np.zeros((3, 3)), build_coupling(params).e, stiffness, mass)
    for _ in range(100):
        x = rng.standard_normal(exchange_only.shape[0])
        form = x @ exchange_only.apply(x)
        energy = exchange_energy(params, mass, x)
        assert energy >= 0.0
        assert form == pytest.approx(energy, rel=1e-12)


@pytest.mark.parametrize(
    "k, pairs",
    [
        ([1.0, 1.0], {(1, 2): 1e4}),
        ([1.0, 1e-3], {(1, 2): 10.0}),
        ([2.0, 1.0, 1e2], {(1, 2): 1e2, (1, 3): 1.0, (2, 3): 1e3}),
    ],
)
def test_sampled_coercivity_and_continuity(k, pairs):
    stiffness, mass = base_matrices(6)
    params = NetworkParams.from_pairs(k, pairs)
    op = assemble_standard(params, stiffness, mass)
    b_op = build_standard_precond(params, stiffness, mass).as_operator()
    bounds = theoretical_bounds(params, discrete_poincare_constant(stiffness, mass))
    rng = np.random.default_rng(23)
    for _ in range(20):
        x, y = rng.standard_normal((2, op.shape[0]))
        b_xx = x @ b_op.apply(x)
        b_yy = y @ b_op.apply(y)
        assert x @ op.apply(x) >= bounds.alpha * b_xx * (1.0 - 1e-12)
        assert abs(x @ op.apply(y)) <= bounds.beta * np.sqrt(b_xx * b_yy) * (1.0 + 1e-12)
