#!/usr/bin/env python3
"""Run the sweep presets, write CSV and SVG panels under dist/, and summarise them."""

from __future__ import annotations

import argparse
import dataclasses
from pathlib import Path
import sys
from typing import List, Optional, Sequence

from rich.console import Console
from rich.table import Table

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from mpt_precond.checks import evaluate_run_checks, flagged
from mpt_precond.cli import configure_logging
from mpt_precond.config import CONFIG_PATH, SWEEPS_DIR, load_general_config, load_sweep_config, parse_int_list
from mpt_precond.reporting import emit_csv, emit_scatter_svg
from mpt_precond.sweep import RunRecord, fit_growth_exponent, run_sweep


DIST_DIR = Path("dist")
DEFAULT_PRESETS = ("table1", "table2", "table3", "three_networks")

console = Console()


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Reproduce the benchmark tables and scatter panels.")
    parser.add_argument(
        "presets",
        nargs="*",
        default=list(DEFAULT_PRESETS),
        help=f"preset names under {SWEEPS_DIR} (default: {' '.join(DEFAULT_PRESETS)})",
    )
    parser.add_argument("--N", dest="n", help="comma list of mesh resolutions replacing each preset's")
    parser.add_argument("--out-dir", type=Path, default=DIST_DIR, help=f"output directory (default: {DIST_DIR})")
    parser.add_argument("--log-level", default="INFO")
    return parser.parse_args(argv)


def reproduce(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    configure_logging(args.log_level)
    settings = load_general_config(ROOT / CONFIG_PATH)

    summary = Table(title="Benchmark presets", show_lines=False)
    summary.add_column("Preset", style="cyan", no_wrap=True)
    summary.add_column("Formulation", style="magenta")
    summary.add_column("Runs", justify="right")
    summary.add_column("Converged", justify="right")
    summary.add_column("Max iterations", justify="right")
    summary.add_column("Max cond est.", justify="right")
    summary.add_column("Iterations slope", justify="right")
    summary.add_column("Cond slope", justify="right")
    summary.add_column("Flagged", style="yellow", justify="right")

    violations = 0
    for name in args.presets:
        config = load_sweep_config(ROOT / SWEEPS_DIR / f"{name}.yaml", settings)
        if args.n:
            config = dataclasses.replace(config, n_values=parse_int_list(args.n, "--N"))
        records = run_sweep(config)
        checks = evaluate_run_checks(records)
        flagged_runs = flagged(checks)
        if config.formulation == "transformed":
            violations += len(flagged_runs)

        csv_path = args.out_dir / f"{name}.csv"
        emit_csv(records, csv_path, j_count=config.j_count)
        emit_scatter_svg(records, "iterations", "cond_est", "xi_sum", args.out_dir / f"{name}_iterations.svg")
        emit_scatter_svg(records, "xi_k_ratio", "cond_est", "xi_sum", args.out_dir / f"{name}_ratio.svg")
        console.print(f"Created: {csv_path}")

        cond_values = [record.cond_est for record in records if record.cond_est is not None]
        summary.add_row(
            name,
            config.formulation,
            str(len(records)),
            str(sum(1 for record in records if record.converged)),
            str(max(record.iterations for record in records)),
            f"{max(cond_values):.4g}" if cond_values else "—",
            _slope(records, "iterations"),
            _slope(records, "cond_est"),
            str(len(flagged_runs)),
        )

    console.print(summary)

    if violations:
        console.print(f"[bold red]Found {violations} transformed runs outside the exact-block envelope[/bold red]")
        return 1

    console.print("[bold green]All transformed runs within the exact-block envelope[/bold green]")
    return 0


def _slope(records: List[RunRecord], y_field: str) -> str:
    try:
        return f"{fit_growth_exponent(records, 'xi_k_ratio', y_field):.3f}"
    except ValueError:
        return "—"


if __name__ == "__main__":
    raise SystemExit(reproduce())
