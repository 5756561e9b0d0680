from pathlib import Path
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from mpt_precond.fem import assemble_mass, assemble_stiffness, build_dof_map
from mpt_precond.formulations import FORMULATIONS, build_formulation
from mpt_precond.mesh import build_unit_square_mesh
from mpt_precond.precond import (
    BlockFactorCache,
    apply_precond,
    build_standard_precond,
    build_transformed_precond,
)
from mpt_precond.system import DimensionMismatchError, NetworkParams, assemble_standard, split_blocks
from mpt_precond.transform import assemble_transformed, diagonalize_by_congruence


def base_matrices(n):
    mesh = build_unit_square_mesh(n)
    dofs = build_dof_map(mesh)
    return assemble_stiffness(mesh, dofs), assemble_mass(mesh, dofs)


def test_without_exchange_the_preconditioner_is_the_operator():
    stiffness, mass = base_matrices(4)
    params = NetworkParams.from_pairs([1.0, 3.0])
    precond = build_standard_precond(params, stiffness, mass)
    op = assemble_standard(params, stiffness, mass)
    assert np.allclose(precond.as_operator().materialize_dense(), op.materialize_dense())
    x = np.random.default_rng(0).standard_normal(op.shape[0])
    assert np.allclose(precond.apply(op.apply(x)), x, rtol=1e-10, atol=1e-10)


def test_standard_blocks_use_lumped_exchange():
    stiffness, mass = base_matrices(4)
    params = NetworkParams.from_pairs([1.0, 1.0], {(1, 2): 5.0})
    precond = build_standard_precond(params, stiffness, mass)
    assert precond.block_defs == ((1.0, 5.0), (1.0, 5.0))
    expected = (stiffness + 5.0 * mass).toarray()
    dense = precond.as_operator().materialize_dense()
    size = stiffness.shape[0]
    assert np.allclose(dense[:size, :size], expected)
    assert np.allclose(dense[size:, size:], expected)
    assert np.linalg.eigvalsh(expected).min() > 0.0


def test_three_network_lumped_weights():
    stiffness, mass = base_matrices(3)
    params = NetworkParams.from_pairs([1.0, 2.0, 3.0], {(1, 2): 1.0, (1, 3): 10.0})
    precond = build_standard_precond(params, stiffness, mass)
    assert precond.block_defs == ((1.0, 11.0), (2.0, 1.0), (3.0, 10.0))


@pytest.mark.parametrize(
    "k, pairs",
    [
        ([1.0, 1.0], {(1, 2): 1e4}),
        ([1.0, 1e-6], {(1, 2): 1e6}),
        ([1.0, 1e2, 1e-2], {(1, 2): 1.0, (1, 3): 1e4, (2, 3): 1e-2}),
    ],
)
def test_transformed_preconditioner_equals_transformed_operator(k, pairs):
    stiffness, mass = base_matrices(4)
    ct = diagonalize_by_congruence(NetworkParams.from_pairs(k, pairs))
    precond = build_transformed_precond(ct, stiffness, mass)
    op = assemble_transformed(ct, stiffness, mass)
    dense_b = precond.as_operator().materialize_dense()
    dense_a = op.materialize_dense()
    assert np.abs(dense_b - dense_a).max() <= 1e-13 * np.abs(dense_a).max()

    x = np.random.default_rng(4).standard_normal(op.shape[0])
    assert np.linalg.norm(precond.apply(op.apply(x)) - x) <= 1e-10 * np.linalg.norm(x)


def test_transformed_blocks_for_unit_permeabilities():
    stiffness, mass = base_matrices(3)
    ct = diagonalize_by_congruence(NetworkParams.from_pairs([1.0, 1.0], {(1, 2): 1e4}))
    precond = build_transformed_precond(ct, stiffness, mass)
    (ws0, wm0), (ws1, wm1) = precond.block_defs
    assert wm0 == 0.0
    assert ws0 == pytest.approx(1.0)
    assert ws1 == pytest.approx(1.0)
    assert wm1 == pytest.approx(2e4, rel=1e-12)

    plain = build_transformed_precond(diagonalize_by_congruence(NetworkParams.from_pairs([1.0, 1.0])), stiffness, mass)
    assert plain.block_defs == ((1.0, 0.0), (1.0, 0.0))


def test_apply_solves_each_block():
    stiffness, mass = base_matrices(5)
    params = NetworkParams.from_pairs([2.0, 0.5], {(1, 2): 3.0})
    precond = build_standard_precond(params, stiffness, mass)
    size = stiffness.shape[0]
    rng = np.random.default_rng(8)
    r = rng.standard_normal(2 * size)
    assert np.array_equal(apply_precond(precond, np.zeros(2 * size)), np.zeros(2 * size))

    z = split_blocks(apply_precond(precond, r), 2, size)
    blocks = split_blocks(r, 2, size)
    for index, (ws, wm) in enumerate(precond.block_defs):
        matrix = ws * stiffness + wm * mass
        assert np.linalg.norm(matrix @ z[index] - blocks[index]) <= 1e-12 * np.linalg.norm(blocks[index])

    s = rng.standard_normal(2 * size)
    left, right = precond.apply(r) @ s, r @ precond.apply(s)
    assert abs(left - right) <= 1e-12 * max(abs(left), 1.0)
    assert r @ precond.apply(r) > 0.0


def test_norm_matches_weighted_sum():
    stiffness, mass = base_matrices(5)
    params = NetworkParams.from_pairs([2.0, 0.5, 1.0], {(1, 2): 3.0, (2, 3): 1.5})
    precond = build_standard_precond(params, stiffness, mass)
    size = stiffness.shape[0]
    x = np.random.default_rng(12).standard_normal(3 * size)
    blocks = split_blocks(x, 3, size)
    xi_lumped = params.xi.sum(axis=1)
    assert np.allclose(xi_lumped, [3.0, 4.5, 1.5])
    expected = sum(
        k * (p @ (stiffness @ p)) + xi * (p @ (mass @ p))
        for k, xi, p in zip(params.k, xi_lumped, blocks)
    )
    assert x @ precond.as_operator().apply(x) == pytest.approx(expected, rel=1e-12)


def test_apply_length_mismatch():
    stiffness, mass = base_matrices(3)
    precond = build_standard_precond(NetworkParams.from_pairs([1.0, 1.0]), stiffness, mass)
    with pytest.raises(DimensionMismatchError):
        precond.apply(np.zeros(5))


def test_cache_reuses_factorizations():
    stiffness, mass = base_matrices(4)
    cache = BlockFactorCache(stiffness, mass)
    params = NetworkParams.from_pairs([1.0, 1.0], {(1, 2): 5.0})
    first = build_standard_precond(params, stiffness, mass, cache=cache)
    second = build_standard_precond(params, stiffness, mass, cache=cache)
    assert first.blocks[0] is first.blocks[1], "identical blocks share one factorization"
    assert second.blocks[0] is first.blocks[0]
    assert (cache.misses, cache.hits, len(cache)) == (1, 3, 1)


def test_cache_evicts_least_recently_used():
    stiffness, mass = base_matrices(3)
    cache = BlockFactorCache(stiffness, mass, max_entries=2)
    first = cache.get(1.0, 0.0)
    cache.get(1.0, 1.0)
    assert cache.get(1.0, 0.0) is first
    cache.get(1.0, 2.0)
    assert len(cache) == 2
    assert cache.get(1.0, 0.0) is first, "recently used entry must survive"
    misses = cache.misses
    cache.get(1.0, 1.0)
    assert cache.misses == misses + 1, "evicted entry is factorized again"


def test_cache_is_safe_across_threads():
    stiffness, mass = base_matrices(4)
    cache = BlockFactorCache(stiffness, mass)
    with ThreadPoolExecutor(max_workers=4) as executor:
        factors = list(executor.map(lambda _: cache.get(1.0, 2.0), range(16)))
    assert all(factor is factors[0] for factor in factors)
    assert len(cache) == 1


def test_cache_rejects_foreign_matrices():
    stiffness, mass = base_matrices(4)
    other_stiffness, other_mass = base_matrices(4)
    cache = BlockFactorCache(other_stiffness, other_mass)
    with pytest.raises(ValueError):
        build_standard_precond(NetworkParams.from_pairs([1.0]), stiffness, mass, cache=cache)
    with pytest.raises(ValueError):
        BlockFactorCache(stiffness, mass, max_entries=0)


def test_formulations_share_one_cache():
    stiffness, mass = base_matrices(4)
    cache = BlockFactorCache(stiffness, mass)
    params = NetworkParams.from_pairs([1.0, 1e-2], {(1, 2): 10.0})
    built = {name: build_formulation(name, params, stiffness, mass, cache=cache) for name in FORMULATIONS}
    for chosen in built.values():
        assert chosen.dimension == 2 * stiffness.shape[0]
        assert chosen.preconditioner() is chosen.preconditioner()
    assert len(cache) == 4

    transformed = built["transformed"]
    g = np.random.default_rng(1).standard_normal(transformed.dimension)
    assert np.allclose(transformed.recover_solution(transformed.transform_rhs(np.zeros_like(g))), 0.0)
    assert np.array_equal(built["standard"].transform_rhs(g), g)


def test_unknown_formulation_rejected():
    stiffness, mass = base_matrices(2)
    with pytest.raises(ValueError, match="multigrid"):
        build_formulation("multigrid", NetworkParams.from_pairs([1.0]), stiffness, mass)
