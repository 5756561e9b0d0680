from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

import yaml

from mpt_precond.krylov import DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE, STOPPING_CRITERIA
from mpt_precond.sweep import SweepConfig
from mpt_precond.system import MAX_DENSE_DIMENSION


CONFIG_PATH = Path("config/config.yaml")
SWEEPS_DIR = Path("config/sweeps")

_PAIR_PATTERN = re.compile(r"^\s*(\d+)\s*-\s*(\d+)\s*$")


class UsageError(ValueError):
    """Raised for malformed command-line or preset input."""


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    criterion: str = "preconditioned"
    seed: int = 0


@dataclass(frozen=True)
class SweepSettings:
    workers: int = 1


@dataclass(frozen=True)
class OracleSettings:
    max_dimension: int = MAX_DENSE_DIMENSION


@dataclass(frozen=True)
class GeneralConfig:
    solver: SolverSettings = field(default_factory=SolverSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    oracle: OracleSettings = field(default_factory=OracleSettings)


def load_general_config(path: Path = CONFIG_PATH) -> GeneralConfig:
    """Load run defaults from YAML; a missing file yields the built-in defaults."""
    if not path.exists():
        return GeneralConfig()

    with path.open("r", encoding="utf-8") as handle:
        data = yaml.safe_load(handle) or {}
    if not isinstance(data, Mapping):
        raise ValueError("configuration file must contain a mapping")

    solver_block = _section(data, "solver")
    defaults = SolverSettings()
    criterion = str(solver_block.get("criterion", defaults.criterion)).strip()
    if criterion not in STOPPING_CRITERIA:
        raise ValueError(f"solver.criterion must be one of {', '.join(STOPPING_CRITERIA)}")
    solver = SolverSettings(
        tolerance=_positive_float(solver_block.get("tolerance", defaults.tolerance), "solver.tolerance"),
        max_iterations=_positive_int(
            solver_block.get("max_iterations", defaults.max_iterations), "solver.max_iterations"
        ),
        criterion=criterion,
        seed=_non_negative_int(solver_block.get("seed", defaults.seed), "solver.seed"),
    )

    sweep_block = _section(data, "sweep")
    sweep = SweepSettings(
        workers=_positive_int(sweep_block.get("workers", SweepSettings.workers), "sweep.workers"),
    )

    oracle_block = _section(data, "oracle")
    oracle = OracleSettings(
        max_dimension=_positive_int(
            oracle_block.get("max_dimension", OracleSettings.max_dimension), "oracle.max_dimension"
        ),
    )
    return GeneralConfig(solver=solver, sweep=sweep, oracle=oracle)


def load_sweep_config(path: Path, defaults: Optional[GeneralConfig] = None) -> SweepConfig:
    """Load a sweep preset (see config/sweeps/)."""
    defaults = defaults or GeneralConfig()
    with path.open("r", encoding="utf-8") as handle:
        data = yaml.safe_load(handle) or {}
    if not isinstance(data, Mapping):
        raise ValueError(f"sweep preset {path} must contain a mapping")

    j_count = _positive_int(data.get("networks"), "networks")

    raw_k = data.get("K")
    if not isinstance(raw_k, list) or len(raw_k) != j_count:
        raise ValueError(f"K must list one entry per network ({j_count})")
    k_values = tuple(_float_tuple(entry, f"K[{index + 1}]") for index, entry in enumerate(raw_k))

    raw_xi = data.get("xi") or {}
    if not isinstance(raw_xi, Mapping):
        raise ValueError("xi must be a mapping of 'i-j' pairs to value lists")
    xi_values = {
        parse_pair(str(key), j_count): _float_tuple(values, f"xi[{key}]")
        for key, values in raw_xi.items()
    }

    raw_n = data.get("N")
    n_values = tuple(_positive_int(item, "N") for item in _as_list(raw_n))

    solver = defaults.solver
    config = SweepConfig(
        j_count=j_count,
        k_values=k_values,
        xi_values=dict(sorted(xi_values.items())),
        n_values=n_values,
        formulation=str(data.get("formulation", "standard")).strip(),
        tolerance=_positive_float(data.get("tolerance", solver.tolerance), "tolerance"),
        max_iterations=_positive_int(data.get("max_iterations", solver.max_iterations), "max_iterations"),
        criterion=str(data.get("criterion", solver.criterion)).strip(),
        seed=_non_negative_int(data.get("seed", solver.seed), "seed"),
        workers=_positive_int(data.get("workers", defaults.sweep.workers), "workers"),
    )
    config.validate()
    return config


def parse_pair(token: str, j_count: int) -> Tuple[int, int]:
    """Parse '1-2' into an ordered 1-based pair (1, 2)."""
    match = _PAIR_PATTERN.match(token)
    if not match:
        raise UsageError(f"malformed network pair '{token}', expected i-j")
    first, second = int(match.group(1)), int(match.group(2))
    if first == second or not (1 <= first <= j_count and 1 <= second <= j_count):
        raise UsageError(f"network pair '{token}' is out of range for {j_count} networks")
    return (first, second) if first < second else (second, first)


def parse_xi_pairs(tokens: Iterable[str], j_count: int) -> Dict[Tuple[int, int], Tuple[float, ...]]:
    """Parse 'i-j=value' tokens; repeated pairs collect several sweep values."""
    collected: Dict[Tuple[int, int], List[float]] = {}
    for raw in tokens:
        token = raw.strip()
        if not token:
            continue
        pair_text, separator, value_text = token.partition("=")
        if not separator:
            raise UsageError(f"malformed exchange token '{token}', expected i-j=value")
        try:
            pair = parse_pair(pair_text, j_count)
        except UsageError as exc:
            raise UsageError(f"malformed exchange token '{token}': {exc}") from exc
        try:
            value = float(value_text)
        except ValueError:
            raise UsageError(f"malformed exchange token '{token}': '{value_text}' is not a number") from None
        if value < 0.0:
            raise UsageError(f"exchange token '{token}' must be non-negative")
        collected.setdefault(pair, []).append(value)
    return {pair: tuple(values) for pair, values in sorted(collected.items())}


def parse_float_list(text: str, label: str) -> Tuple[float, ...]:
    values: List[float] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(float(item))
        except ValueError:
            raise UsageError(f"{label}: '{item}' is not a number") from None
    if not values:
        raise UsageError(f"{label}: expected at least one value")
    return tuple(values)


def parse_int_list(text: str, label: str) -> Tuple[int, ...]:
    values: List[int] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(int(item))
        except ValueError:
            raise UsageError(f"{label}: '{item}' is not an integer") from None
    if not values:
        raise UsageError(f"{label}: expected at least one value")
    return tuple(values)


def _section(data: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    block = data.get(name) or {}
    if not isinstance(block, Mapping):
        raise ValueError(f"{name} section must be a mapping")
    return block


def _as_list(value: Any) -> List[Any]:
    if value is None:
        return []
    if isinstance(value, list):
        return value
    return [value]


def _to_float(value: Any, label: str) -> float:
    # YAML 1.1 reads '1e4' (no dot) as a string.
    if isinstance(value, bool):
        raise ValueError(f"{label} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{label} must be a number, got {value!r}") from None


def _float_tuple(value: Any, label: str) -> Tuple[float, ...]:
    values = tuple(_to_float(item, label) for item in _as_list(value))
    if not values:
        raise ValueError(f"{label} must not be empty")
    return values


def _positive_float(value: Any, label: str) -> float:
    number = _to_float(value, label)
    if number <= 0.0:
        raise ValueError(f"{label} must be positive")
    return number


def _positive_int(value: Any, label: str) -> int:
    number = _non_negative_int(value, label)
    if number < 1:
        raise ValueError(f"{label} must be >= 1")
    return number


def _non_negative_int(value: Any, label: str) -> int:
    if isinstance(value, bool) or value is None:
        raise ValueError(f"{label} must be an integer, got {value!r}")
    try:
        number = int(value)
    except (TypeError, ValueError):
        raise ValueError(f"{label} must be an integer, got {value!r}") from None
    if number != value and not isinstance(value, str):
        raise ValueError(f"{label} must be an integer, got {value!r}")
    if number < 0:
        raise ValueError(f"{label} must be non-negative")
    return number
