from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse

from mpt_precond.fem import DofMap, assemble_mass, assemble_stiffness, build_dof_map
from mpt_precond.formulations import FORMULATIONS, build_formulation
from mpt_precond.krylov import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
    STOPPING_CRITERIA,
    CGReport,
    pcg,
    random_initial_guess,
)
from mpt_precond.mesh import StructuredMesh, build_unit_square_mesh
from mpt_precond.precond import BlockFactorCache
from mpt_precond.system import NetworkParams


logger = logging.getLogger(__name__)

Pair = Tuple[int, int]
XiPairs = Tuple[Tuple[Pair, float], ...]

RECORD_FIELDS: Tuple[str, ...] = (
    "n",
    "iterations",
    "cond_est",
    "lambda_min_est",
    "lambda_max_est",
    "xi_sum",
    "k_sum",
    "xi_k_ratio",
    "wall_time",
)


@dataclass(frozen=True)
class SweepConfig:
    """Cross product of permeabilities, exchange coefficients and mesh resolutions.

    Pairs missing from ``xi_values`` have no exchange.
    """

    j_count: int
    k_values: Tuple[Tuple[float, ...], ...]
    xi_values: Mapping[Pair, Tuple[float, ...]] = field(default_factory=dict)
    n_values: Tuple[int, ...] = (8,)
    formulation: str = "standard"
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    criterion: str = "preconditioned"
    seed: int = 0
    workers: int = 1

    def validate(self) -> None:
        if self.j_count < 1:
            raise ValueError(f"networks must be >= 1, got {self.j_count}")
        if len(self.k_values) != self.j_count:
            raise ValueError(f"expected {self.j_count} permeability lists, got {len(self.k_values)}")
        for index, values in enumerate(self.k_values, start=1):
            if not values:
                raise ValueError(f"K{index} has no values")
            if any(not math.isfinite(value) or value <= 0.0 for value in values):
                raise ValueError(f"K{index} values must be positive and finite, got {list(values)}")
        for (first, second), values in self.xi_values.items():
            if not (1 <= first < second <= self.j_count):
                raise ValueError(f"exchange pair {first}-{second} is invalid for {self.j_count} networks")
            if not values:
                raise ValueError(f"xi {first}-{second} has no values")
            if any(not math.isfinite(value) or value < 0.0 for value in values):
                raise ValueError(f"xi {first}-{second} values must be non-negative and finite")
        if not self.n_values:
            raise ValueError("at least one mesh resolution is required")
        if any(n < 1 for n in self.n_values):
            raise ValueError(f"mesh resolutions must be >= 1, got {list(self.n_values)}")
        if self.formulation not in FORMULATIONS:
            raise ValueError(
                f"unknown formulation '{self.formulation}', expected one of {', '.join(FORMULATIONS)}"
            )
        if self.tolerance <= 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.criterion not in STOPPING_CRITERIA:
            raise ValueError(f"unknown stopping criterion '{self.criterion}'")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    @property
    def size(self) -> int:
        count = len(self.n_values)
        for values in self.k_values:
            count *= len(values)
        for values in self.xi_values.values():
            count *= len(values)
        return count

    def grid_points(self) -> Iterator[SweepPoint]:
        """Points in cross-product order: K₁ outermost, then ξ pairs, N innermost."""
        pairs = sorted(self.xi_values)
        axes = [*self.k_values, *(self.xi_values[pair] for pair in pairs), self.n_values]
        for index, combo in enumerate(itertools.product(*axes)):
            k = tuple(float(value) for value in combo[: self.j_count])
            xi = dict(zip(pairs, combo[self.j_count : self.j_count + len(pairs)]))
            yield SweepPoint(
                index=index,
                n=int(combo[-1]),
                params=NetworkParams.from_pairs(k, xi),
            )


@dataclass(frozen=True)
class SweepPoint:
    index: int
    n: int
    params: NetworkParams


@dataclass(frozen=True)
class RunRecord:
    j_count: int
    n: int
    formulation: str
    k: Tuple[float, ...]
    xi_pairs: XiPairs
    iterations: int
    converged: bool
    cond_est: Optional[float]
    lambda_min_est: Optional[float]
    lambda_max_est: Optional[float]
    seed: int
    wall_time: float
    breakdown: bool = False

    @property
    def xi_sum(self) -> float:
        return float(sum(value for _, value in self.xi_pairs))

    @property
    def k_sum(self) -> float:
        return float(sum(self.k))

    @property
    def xi_k_ratio(self) -> float:
        return self.xi_sum / self.k_sum

    def params(self) -> NetworkParams:
        return NetworkParams.from_pairs(self.k, dict(self.xi_pairs))


def record_value(record: RunRecord, name: str) -> Optional[float]:
    if name not in RECORD_FIELDS:
        raise ValueError(f"unknown record field '{name}', expected one of {', '.join(RECORD_FIELDS)}")
    value = getattr(record, name)
    return None if value is None else float(value)


@dataclass(frozen=True)
class MeshAssembly:
    """Mesh, interior dofs and base matrices shared by every run at one resolution."""

    mesh: StructuredMesh
    dofs: DofMap
    stiffness: scipy.sparse.csr_matrix = field(repr=False)
    mass: scipy.sparse.csr_matrix = field(repr=False)
    cache: BlockFactorCache = field(repr=False)

    @property
    def n(self) -> int:
        return self.mesh.n


def assemble_mesh(n: int) -> MeshAssembly:
    mesh = build_unit_square_mesh(n)
    dofs = build_dof_map(mesh)
    if dofs.n_interior == 0:
        raise ValueError(f"mesh with n={n} has no interior vertices to solve for")
    stiffness = assemble_stiffness(mesh, dofs)
    mass = assemble_mass(mesh, dofs)
    return MeshAssembly(
        mesh=mesh,
        dofs=dofs,
        stiffness=stiffness,
        mass=mass,
        cache=BlockFactorCache(stiffness, mass),
    )


def solve_point(
    assembly: MeshAssembly,
    params: NetworkParams,
    formulation: str = "standard",
    *,
    rhs: Optional[np.ndarray] = None,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    criterion: str = "preconditioned",
    seed: int = 0,
) -> Tuple[np.ndarray, CGReport]:
    """Run CG for one parameter point; returns network pressures and the CG report.

    ``rhs`` defaults to zero, so the random initial guess alone drives the iteration.
    """
    chosen = build_formulation(
        formulation, params, assembly.stiffness, assembly.mass, cache=assembly.cache
    )
    if rhs is None:
        rhs = np.zeros(chosen.dimension)
    x0 = random_initial_guess(chosen.dimension, seed)
    solution, report = pcg(
        chosen.operator(),
        chosen.preconditioner(),
        chosen.transform_rhs(rhs),
        x0,
        tolerance,
        max_iterations,
        criterion=criterion,
        seed=seed,
    )
    return chosen.recover_solution(solution), report


def run_point(
    assembly: MeshAssembly,
    params: NetworkParams,
    formulation: str = "standard",
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    criterion: str = "preconditioned",
    seed: int = 0,
) -> RunRecord:
    started = time.perf_counter()
    _, report = solve_point(
        assembly,
        params,
        formulation,
        tolerance=tolerance,
        max_iterations=max_iterations,
        criterion=criterion,
        seed=seed,
    )
    wall_time = time.perf_counter() - started

    iterations = report.iterations
    if not report.converged and not report.breakdown:
        # Capped runs are reported one past the limit.
        iterations = max_iterations + 1
        logger.warning(
            "No convergence in %d iterations (N=%d, %s, K=%s, xi=%s)",
            max_iterations,
            assembly.n,
            formulation,
            params.k.tolist(),
            dict(params.pairs()),
        )

    return RunRecord(
        j_count=params.j_count,
        n=assembly.n,
        formulation=formulation,
        k=tuple(float(value) for value in params.k),
        xi_pairs=params.pairs(),
        iterations=iterations,
        converged=report.converged,
        cond_est=report.cond_est,
        lambda_min_est=report.lambda_min_est,
        lambda_max_est=report.lambda_max_est,
        seed=seed,
        wall_time=wall_time,
        breakdown=report.breakdown,
    )


def run_sweep(config: SweepConfig) -> List[RunRecord]:
    """One CG run per grid point, in cross-product order; point i uses seed + i."""
    config.validate()
    points = list(config.grid_points())
    assemblies: Dict[int, MeshAssembly] = {n: assemble_mesh(n) for n in sorted(set(config.n_values))}
    logger.info(
        "Running %d %s runs for J=%d on N=%s with %d worker(s)",
        len(points),
        config.formulation,
        config.j_count,
        list(config.n_values),
        config.workers,
    )

    def task(point: SweepPoint) -> RunRecord:
        record = run_point(
            assemblies[point.n],
            point.params,
            config.formulation,
            tolerance=config.tolerance,
            max_iterations=config.max_iterations,
            criterion=config.criterion,
            seed=config.seed + point.index,
        )
        logger.debug(
            "Run %d: N=%d K=%s xi=%s iterations=%d cond_est=%s",
            point.index,
            record.n,
            list(record.k),
            dict(record.xi_pairs),
            record.iterations,
            record.cond_est,
        )
        return record

    if config.workers == 1:
        records = [task(point) for point in points]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            records = list(executor.map(task, points))

    failed = sum(1 for record in records if not record.converged)
    logger.info("Sweep finished: %d runs, %d without convergence", len(records), failed)
    return records


def fit_growth_exponent(
    records: Sequence[RunRecord],
    x_field: str = "xi_k_ratio",
    y_field: str = "iterations",
) -> float:
    """Least-squares slope of log(y) against log(x) over records with positive values."""
    xs: List[float] = []
    ys: List[float] = []
    for record in records:
        x_value = record_value(record, x_field)
        y_value = record_value(record, y_field)
        if x_value is None or y_value is None or x_value <= 0.0 or y_value <= 0.0:
            continue
        xs.append(x_value)
        ys.append(y_value)
    if len(set(xs)) < 2:
        raise ValueError(f"need at least two distinct positive {x_field} values to fit a growth exponent")
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)
