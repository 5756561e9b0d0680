from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Protocol, Sequence, Tuple

import numpy as np

from mpt_precond.linalg import tridiag_eig_extremes


logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9
DEFAULT_MAX_ITERATIONS = 3000

StoppingCriterion = Literal["preconditioned", "unpreconditioned", "absolute"]
STOPPING_CRITERIA: Tuple[str, ...] = ("preconditioned", "unpreconditioned", "absolute")


class NonFiniteError(FloatingPointError):
    """Raised when CG produces NaN or infinite values."""


class LinearOperator(Protocol):
    def apply(self, x: np.ndarray) -> np.ndarray: ...


@dataclass
class CGReport:
    iterations: int
    converged: bool
    final_rel_residual: float
    alphas: List[float] = field(default_factory=list)
    betas: List[float] = field(default_factory=list)
    lambda_min_est: Optional[float] = None
    lambda_max_est: Optional[float] = None
    cond_est: Optional[float] = None
    seed: Optional[int] = None
    breakdown: bool = False
    criterion: str = "preconditioned"


def random_initial_guess(dim: int, seed: int) -> np.ndarray:
    """Entries uniform in [0, 1) from numpy's PCG64 generator."""
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    return np.random.default_rng(seed).random(dim)


def lanczos_estimate(alphas: Sequence[float], betas: Sequence[float]) -> Tuple[float, float, float]:
    """Extreme Ritz values of the preconditioned operator from CG coefficients.

    The Lanczos matrix has diagonal 1/α_k + β_{k−1}/α_{k−1} and off-diagonal √β_k/α_k.
    """
    alpha = np.asarray(alphas, dtype=np.float64)
    beta = np.asarray(betas, dtype=np.float64)
    steps = alpha.size
    if steps == 0:
        raise ValueError("at least one CG iteration is required for a Lanczos estimate")
    if beta.size < steps - 1:
        raise ValueError(f"{steps} CG steps need at least {steps - 1} beta coefficients, got {beta.size}")
    beta = beta[: steps - 1]

    diagonal = 1.0 / alpha
    diagonal[1:] += beta / alpha[:-1]
    off_diagonal = np.sqrt(beta) / alpha[:-1]

    lambda_min, lambda_max = tridiag_eig_extremes(diagonal, off_diagonal)
    return lambda_min, lambda_max, lambda_max / lambda_min


def _check_finite(label: str, *values: float) -> None:
    for value in values:
        if not math.isfinite(value):
            raise NonFiniteError(f"non-finite {label} encountered in CG: {value!r}")


def pcg(
    op: LinearOperator,
    pre: LinearOperator,
    rhs: np.ndarray,
    x0: np.ndarray,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    *,
    criterion: StoppingCriterion = "preconditioned",
    seed: Optional[int] = None,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> Tuple[np.ndarray, CGReport]:
    """Preconditioned conjugate gradients recording α/β for Lanczos estimates.

    With the default criterion, iterations stop once √(rᵀz)/√(r₀ᵀz₀) ≤ tolerance.
    """
    if criterion not in STOPPING_CRITERIA:
        raise ValueError(f"unknown stopping criterion '{criterion}'")
    if tolerance <= 0.0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    if max_iterations < 1:
        raise ValueError(f"max_iterations must be >= 1, got {max_iterations}")
    rhs = np.asarray(rhs, dtype=np.float64)
    x = np.array(x0, dtype=np.float64)
    if rhs.shape != x.shape or rhs.ndim != 1:
        raise ValueError(f"rhs shape {rhs.shape} does not match x0 shape {x.shape}")

    r = rhs - op.apply(x)
    z = pre.apply(r)
    rz = float(r @ z)
    _check_finite("residual", rz)

    def measure(residual: np.ndarray, rz_value: float) -> float:
        if criterion == "unpreconditioned":
            return float(np.linalg.norm(residual))
        return math.sqrt(max(rz_value, 0.0))

    report = CGReport(iterations=0, converged=False, final_rel_residual=1.0, seed=seed, criterion=criterion)
    if rz < 0.0:
        report.breakdown = True
        logger.warning("CG breakdown before the first iteration: r0ᵀz0 = %.3e", rz)
        return x, report

    reference = measure(r, rz) if criterion != "absolute" else 1.0
    if reference == 0.0:
        report.converged = True
        report.final_rel_residual = 0.0
        return x, report

    p = z.copy()
    for step in range(max_iterations):
        q = op.apply(p)
        pq = float(p @ q)
        _check_finite("curvature", pq)
        if pq <= 0.0:
            report.breakdown = True
            logger.warning("CG breakdown at iteration %d: pᵀAp = %.3e", step + 1, pq)
            break

        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        z = pre.apply(r)
        rz_next = float(r @ z)
        _check_finite("residual", rz_next, alpha)

        report.alphas.append(alpha)
        report.iterations = step + 1
        if callback is not None:
            callback(report.iterations, x)

        if rz_next < 0.0:
            report.breakdown = True
            logger.warning("CG breakdown at iteration %d: rᵀz = %.3e", step + 1, rz_next)
            break

        relative = measure(r, rz_next) / reference
        report.final_rel_residual = relative
        if relative <= tolerance:
            report.converged = True
            break

        beta = rz_next / rz
        report.betas.append(beta)
        p = z + beta * p
        rz = rz_next

    if report.alphas:
        estimate = lanczos_estimate(report.alphas, report.betas)
        report.lambda_min_est, report.lambda_max_est, report.cond_est = estimate

    logger.debug(
        "CG finished: iterations=%d converged=%s rel_residual=%.3e cond_est=%s",
        report.iterations,
        report.converged,
        report.final_rel_residual,
        report.cond_est,
    )
    return x, report
