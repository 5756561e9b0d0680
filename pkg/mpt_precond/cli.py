from __future__ import annotations

import argparse
import dataclasses
import logging
from pathlib import Path
from typing import Any, Dict, NoReturn, Optional, Sequence

import yaml
from rich.console import Console
from rich.logging import RichHandler

from mpt_precond.checks import evaluate_run_checks
from mpt_precond.config import (
    CONFIG_PATH,
    GeneralConfig,
    UsageError,
    load_general_config,
    load_sweep_config,
    parse_float_list,
    parse_int_list,
    parse_xi_pairs,
)
from mpt_precond.formulations import FORMULATIONS
from mpt_precond.krylov import STOPPING_CRITERIA
from mpt_precond.oracle import analyse_configuration
from mpt_precond.reporting import (
    build_oracle_table,
    build_records_table,
    emit_csv,
    emit_scatter_svg,
    read_csv,
)
from mpt_precond.sweep import RECORD_FIELDS, SweepConfig, SweepPoint, run_sweep


logger = logging.getLogger(__name__)

console = Console()
error_console = Console(stderr=True)

DEFAULT_SWEEP_CSV = Path("dist/sweep.csv")
DEFAULT_PLOT_SVG = Path("dist/sweep.svg")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def configure_logging(level: str = "WARNING") -> None:
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise UsageError(f"unknown log level '{level}'")
    logging.basicConfig(
        level=numeric,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=error_console, show_path=False)],
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="mpt-bench",
        description="Preconditioned CG benchmarks for the multiple-network porosity equations.",
    )
    parser.add_argument("--log-level", default="WARNING", help="logging level (default: WARNING)")
    parser.add_argument(
        "--settings",
        type=Path,
        default=CONFIG_PATH,
        help=f"run defaults file (default: {CONFIG_PATH})",
    )
    subparsers = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)

    def add_problem_arguments(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--networks", type=int, help="number of networks J")
        sub.add_argument("--K", dest="k", help="comma list of permeabilities, one per network")
        sub.add_argument(
            "--xi",
            action="append",
            default=[],
            help="comma list of i-j=value exchange coefficients; repeat a pair to sweep it",
        )
        sub.add_argument("--N", dest="n", help="comma list of mesh resolutions")
        sub.add_argument("--formulation", choices=FORMULATIONS)
        sub.add_argument("--tol", type=float, help="CG tolerance")
        sub.add_argument("--max-iters", type=int, help="CG iteration cap")
        sub.add_argument("--criterion", choices=STOPPING_CRITERIA, help="CG stopping criterion")
        sub.add_argument("--seed", type=int, help="base seed of the random initial guesses")

    solve = subparsers.add_parser("solve", help="run one configuration")
    add_problem_arguments(solve)
    solve.add_argument("--out", type=Path, help="also write the run as CSV")

    sweep = subparsers.add_parser("sweep", help="run a parameter sweep and write CSV")
    add_problem_arguments(sweep)
    sweep.add_argument("--config", type=Path, help="sweep preset (see config/sweeps/)")
    sweep.add_argument("--workers", type=int, help="concurrent runs")
    sweep.add_argument("--out", type=Path, default=DEFAULT_SWEEP_CSV, help=f"CSV path (default: {DEFAULT_SWEEP_CSV})")

    oracle = subparsers.add_parser("oracle", help="exact condition number on a small mesh")
    add_problem_arguments(oracle)

    plot = subparsers.add_parser("plot", help="scatter plot of a sweep CSV")
    plot.add_argument("--csv", type=Path, required=True, help="sweep CSV to read")
    plot.add_argument("--x-field", default="xi_k_ratio", choices=RECORD_FIELDS)
    plot.add_argument("--y-field", default="cond_est", choices=RECORD_FIELDS)
    plot.add_argument("--color-field", default="xi_sum", choices=RECORD_FIELDS)
    plot.add_argument("--out", type=Path, default=DEFAULT_PLOT_SVG, help=f"SVG path (default: {DEFAULT_PLOT_SVG})")
    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        configure_logging(args.log_level)
        if args.command is None:
            error_console.print(parser.format_usage().rstrip())
            return EXIT_USAGE
        settings = load_general_config(args.settings)
        logger.debug("Run defaults: %s", settings)
        handler = {
            "solve": _run_solve,
            "sweep": _run_sweep,
            "oracle": _run_oracle,
            "plot": _run_plot,
        }[args.command]
        return handler(args, settings)
    except SystemExit as exc:
        # --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except OSError as exc:
        error_console.print(f"[bold red]I/O error:[/bold red] {exc}")
        return EXIT_IO
    except (ValueError, FloatingPointError, yaml.YAMLError) as exc:
        error_console.print(f"[bold red]error:[/bold red] {exc}")
        return EXIT_USAGE


def sweep_config_from_args(args: argparse.Namespace, settings: GeneralConfig) -> SweepConfig:
    """Build a sweep from a preset (when given) with command-line overrides on top."""
    preset: Optional[Path] = getattr(args, "config", None)
    if preset is not None:
        config = load_sweep_config(preset, settings)
    else:
        config = SweepConfig(
            j_count=1,
            k_values=((1.0,),),
            tolerance=settings.solver.tolerance,
            max_iterations=settings.solver.max_iterations,
            criterion=settings.solver.criterion,
            seed=settings.solver.seed,
            workers=settings.sweep.workers,
        )

    overrides: Dict[str, Any] = _problem_axes(args, config)
    if args.n is not None:
        overrides["n_values"] = parse_int_list(args.n, "--N")
    for flag, name in (
        ("formulation", "formulation"),
        ("tol", "tolerance"),
        ("max_iters", "max_iterations"),
        ("criterion", "criterion"),
        ("seed", "seed"),
        ("workers", "workers"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value

    config = dataclasses.replace(config, **overrides)
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return config


def _problem_axes(args: argparse.Namespace, base: SweepConfig) -> Dict[str, Any]:
    k_list = parse_float_list(args.k, "--K") if args.k is not None else None
    j_count = args.networks if args.networks is not None else (len(k_list) if k_list else base.j_count)
    if j_count < 1:
        raise UsageError(f"--networks must be >= 1, got {j_count}")

    overrides: Dict[str, Any] = {"j_count": j_count}
    if k_list is not None:
        if len(k_list) != j_count:
            raise UsageError(f"--K lists {len(k_list)} values for {j_count} networks")
        overrides["k_values"] = tuple((value,) for value in k_list)
    elif j_count != base.j_count:
        overrides["k_values"] = ((1.0,),) * j_count

    if args.xi:
        tokens = [token for chunk in args.xi for token in chunk.split(",")]
        overrides["xi_values"] = parse_xi_pairs(tokens, j_count)
    elif j_count != base.j_count:
        overrides["xi_values"] = {}
    return overrides


def _single_point(config: SweepConfig, command: str) -> SweepPoint:
    if config.size != 1:
        raise UsageError(f"{command} needs exactly one parameter point and one N, got {config.size}")
    return next(config.grid_points())


def _run_solve(args: argparse.Namespace, settings: GeneralConfig) -> int:
    config = sweep_config_from_args(args, settings)
    _single_point(config, "solve")
    records = run_sweep(config)
    console.print(build_records_table(records, evaluate_run_checks(records), title="MPT solve"))
    if args.out is not None:
        emit_csv(records, args.out)
        console.print(f"Created: {args.out}")
    return EXIT_OK


def _run_sweep(args: argparse.Namespace, settings: GeneralConfig) -> int:
    config = sweep_config_from_args(args, settings)
    records = run_sweep(config)
    emit_csv(records, args.out, j_count=config.j_count)
    console.print(build_records_table(records, evaluate_run_checks(records), title="MPT sweep"))
    console.print(f"Created: {args.out}")
    return EXIT_OK


def _run_oracle(args: argparse.Namespace, settings: GeneralConfig) -> int:
    config = sweep_config_from_args(args, settings)
    point = _single_point(config, "oracle")
    report = analyse_configuration(
        point.params,
        point.n,
        config.formulation,
        max_dimension=settings.oracle.max_dimension,
    )
    console.print(build_oracle_table(report))
    return EXIT_OK


def _run_plot(args: argparse.Namespace, settings: GeneralConfig) -> int:
    records = read_csv(args.csv)
    drawn = emit_scatter_svg(records, args.x_field, args.y_field, args.color_field, args.out)
    console.print(f"Created: {args.out} ({drawn} points)")
    return EXIT_OK
