from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple
import xml.etree.ElementTree as ET

from rich.table import Table

from mpt_precond.checks import RunCheck
from mpt_precond.oracle import OracleReport
from mpt_precond.sweep import RECORD_FIELDS, RunRecord, XiPairs, record_value


logger = logging.getLogger(__name__)

CSV_LEADING_COLUMNS = ("J", "N", "formulation")
CSV_TRAILING_COLUMNS = (
    "xi_pairs",
    "iterations",
    "converged",
    "cond_est",
    "lambda_min",
    "lambda_max",
    "seed",
    "wall_time_s",
)
LOG_SCALE_FIELDS = ("xi_k_ratio",)
FIELD_LABELS: Dict[str, str] = {
    "n": "N",
    "iterations": "CG iterations",
    "cond_est": "condition number estimate",
    "lambda_min_est": "λ_min estimate",
    "lambda_max_est": "λ_max estimate",
    "xi_sum": "Σξ",
    "k_sum": "ΣK",
    "xi_k_ratio": "Σξ / ΣK",
    "wall_time": "wall time (s)",
}

SVG_NAMESPACE = "http://www.w3.org/2000/svg"
SVG_WIDTH = 640
SVG_HEIGHT = 480
SVG_MARGIN_LEFT = 80
SVG_MARGIN_RIGHT = 30
SVG_MARGIN_TOP = 40
SVG_MARGIN_BOTTOM = 60
POINT_RADIUS = 4


def csv_header(j_count: int) -> List[str]:
    return [*CSV_LEADING_COLUMNS, *(f"K{index}" for index in range(1, j_count + 1)), *CSV_TRAILING_COLUMNS]


def emit_csv(records: Sequence[RunRecord], path: Path, *, j_count: Optional[int] = None) -> None:
    """Write one row per record in the given order; floats keep full precision."""
    counts = {record.j_count for record in records}
    if len(counts) > 1:
        raise ValueError(f"records mix network counts {sorted(counts)}; write them to separate files")
    if counts:
        found = counts.pop()
        if j_count is not None and j_count != found:
            raise ValueError(f"records have J={found}, expected J={j_count}")
        j_count = found
    j_count = j_count or 1

    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(csv_header(j_count))
        for record in records:
            writer.writerow(
                [
                    record.j_count,
                    record.n,
                    record.formulation,
                    *(repr(value) for value in record.k),
                    format_xi_pairs(record.xi_pairs),
                    record.iterations,
                    "true" if record.converged else "false",
                    _format_optional(record.cond_est),
                    _format_optional(record.lambda_min_est),
                    _format_optional(record.lambda_max_est),
                    record.seed,
                    repr(record.wall_time),
                ]
            )


def read_csv(path: Path) -> List[RunRecord]:
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path} is empty")
        j_count = len(header) - len(CSV_LEADING_COLUMNS) - len(CSV_TRAILING_COLUMNS)
        if j_count < 1 or header != csv_header(j_count):
            raise ValueError(f"{path} does not have a sweep CSV header")

        records: List[RunRecord] = []
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{line_number}: expected {len(header)} columns, got {len(row)}")
            values = dict(zip(header, row))
            try:
                records.append(
                    RunRecord(
                        j_count=int(values["J"]),
                        n=int(values["N"]),
                        formulation=values["formulation"],
                        k=tuple(float(values[f"K{index}"]) for index in range(1, j_count + 1)),
                        xi_pairs=parse_xi_pairs_column(values["xi_pairs"]),
                        iterations=int(values["iterations"]),
                        converged=_parse_bool(values["converged"]),
                        cond_est=_parse_optional(values["cond_est"]),
                        lambda_min_est=_parse_optional(values["lambda_min"]),
                        lambda_max_est=_parse_optional(values["lambda_max"]),
                        seed=int(values["seed"]),
                        wall_time=float(values["wall_time_s"]),
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{line_number}: {exc}") from exc
    return records


def format_xi_pairs(pairs: XiPairs) -> str:
    return ";".join(f"{first}-{second}={value!r}" for (first, second), value in pairs)


def parse_xi_pairs_column(text: str) -> XiPairs:
    pairs: List[Tuple[Tuple[int, int], float]] = []
    for item in filter(None, text.split(";")):
        pair_text, _, value_text = item.partition("=")
        first, _, second = pair_text.partition("-")
        pairs.append(((int(first), int(second)), float(value_text)))
    return tuple(pairs)


def _format_optional(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _parse_optional(text: str) -> Optional[float]:
    return float(text) if text.strip() else None


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered not in ("true", "false"):
        raise ValueError(f"converged must be true or false, got '{text}'")
    return lowered == "true"


def emit_scatter_svg(
    records: Sequence[RunRecord],
    x_field: str,
    y_field: str,
    color_field: str,
    path: Path,
) -> int:
    """Scatter plot with one circle per record; returns the number of points drawn.

    The x axis is logarithmic for ratio fields. Colours run blue→red with the
    magnitude of ``color_field`` (log-scaled when every value is positive).
    """
    for name in (x_field, y_field, color_field):
        if name not in RECORD_FIELDS:
            raise ValueError(f"unknown record field '{name}', expected one of {', '.join(RECORD_FIELDS)}")
    if not records:
        raise ValueError("at least one record is required to draw a scatter plot")

    log_x = x_field in LOG_SCALE_FIELDS
    points: List[Tuple[float, float, float]] = []
    for record in records:
        x_value = record_value(record, x_field)
        y_value = record_value(record, y_field)
        color_value = record_value(record, color_field)
        if x_value is None or y_value is None:
            continue
        if log_x and x_value <= 0.0:
            continue
        points.append((x_value, y_value, color_value if color_value is not None else 0.0))
    skipped = len(records) - len(points)
    if skipped:
        logger.warning("Skipped %d record(s) without a plottable %s/%s value", skipped, x_field, y_field)

    root = ET.Element(
        "svg",
        attrib={
            "xmlns": SVG_NAMESPACE,
            "version": "1.1",
            "width": str(SVG_WIDTH),
            "height": str(SVG_HEIGHT),
            "viewBox": f"0 0 {SVG_WIDTH} {SVG_HEIGHT}",
        },
    )
    ET.SubElement(root, "title").text = f"{FIELD_LABELS[y_field]} vs {FIELD_LABELS[x_field]}"
    ET.SubElement(root, "rect", attrib={"width": str(SVG_WIDTH), "height": str(SVG_HEIGHT), "fill": "white"})

    left, right = SVG_MARGIN_LEFT, SVG_WIDTH - SVG_MARGIN_RIGHT
    top, bottom = SVG_MARGIN_TOP, SVG_HEIGHT - SVG_MARGIN_BOTTOM
    axes = ET.SubElement(root, "g", attrib={"class": "axes", "stroke": "black"})
    ET.SubElement(axes, "line", attrib=_line(left, bottom, right, bottom))
    ET.SubElement(axes, "line", attrib=_line(left, top, left, bottom))

    xs = [math.log10(x) if log_x else x for x, _, _ in points]
    ys = [y for _, y, _ in points]
    x_range = _padded_range(xs)
    y_range = _padded_range(ys)

    def to_px(value: float, bounds: Tuple[float, float], start: float, stop: float) -> float:
        low, high = bounds
        return start + (value - low) / (high - low) * (stop - start)

    labels = ET.SubElement(root, "g", attrib={"class": "labels", "font-family": "sans-serif", "font-size": "12"})
    for tick, text in _ticks(x_range, log_x):
        x_px = to_px(tick, x_range, left, right)
        ET.SubElement(axes, "line", attrib=_line(x_px, bottom, x_px, bottom + 5))
        ET.SubElement(labels, "text", attrib={"x": _fmt(x_px), "y": _fmt(bottom + 20), "text-anchor": "middle"}).text = text
    for tick, text in _ticks(y_range, False):
        y_px = to_px(tick, y_range, bottom, top)
        ET.SubElement(axes, "line", attrib=_line(left - 5, y_px, left, y_px))
        ET.SubElement(labels, "text", attrib={"x": _fmt(left - 8), "y": _fmt(y_px + 4), "text-anchor": "end"}).text = text
    ET.SubElement(
        labels,
        "text",
        attrib={"x": _fmt((left + right) / 2), "y": _fmt(SVG_HEIGHT - 15), "text-anchor": "middle"},
    ).text = FIELD_LABELS[x_field] + (" (log scale)" if log_x else "")
    ET.SubElement(
        labels,
        "text",
        attrib={
            "x": "20",
            "y": _fmt((top + bottom) / 2),
            "text-anchor": "middle",
            "transform": f"rotate(-90 20 {_fmt((top + bottom) / 2)})",
        },
    ).text = FIELD_LABELS[y_field]
    ET.SubElement(
        labels,
        "text",
        attrib={"x": _fmt(right), "y": _fmt(top - 15), "text-anchor": "end"},
    ).text = f"colour: {FIELD_LABELS[color_field]} (blue low, red high)"

    colors = _color_ramp([color for _, _, color in points])
    series = ET.SubElement(root, "g", attrib={"class": "points"})
    for x_value, y_value, color in zip(xs, ys, colors):
        ET.SubElement(
            series,
            "circle",
            attrib={
                "cx": _fmt(to_px(x_value, x_range, left, right)),
                "cy": _fmt(to_px(y_value, y_range, bottom, top)),
                "r": str(POINT_RADIUS),
                "fill": color,
            },
        )

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(ET.tostring(root, encoding="utf-8", xml_declaration=True))
    return len(points)


def _line(x1: float, y1: float, x2: float, y2: float) -> Dict[str, str]:
    return {"x1": _fmt(x1), "y1": _fmt(y1), "x2": _fmt(x2), "y2": _fmt(y2)}


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _padded_range(values: Sequence[float]) -> Tuple[float, float]:
    if not values:
        return 0.0, 1.0
    low, high = min(values), max(values)
    if high == low:
        pad = abs(low) * 0.1 or 1.0
        return low - pad, high + pad
    pad = (high - low) * 0.05
    return low - pad, high + pad


def _ticks(bounds: Tuple[float, float], log_scale: bool) -> List[Tuple[float, str]]:
    low, high = bounds
    if log_scale:
        decades = range(math.ceil(low), math.floor(high) + 1)
        return [(float(exponent), f"1e{exponent}") for exponent in decades]
    step = (high - low) / 4
    return [(low + index * step, f"{low + index * step:.3g}") for index in range(5)]


def _color_ramp(values: Sequence[float]) -> List[str]:
    if not values:
        return []
    scaled = list(values)
    if all(value > 0.0 for value in scaled):
        scaled = [math.log10(value) for value in scaled]
    low, high = min(scaled), max(scaled)
    colors: List[str] = []
    for value in scaled:
        weight = 0.5 if high == low else (value - low) / (high - low)
        red = round(255 * weight)
        colors.append(f"rgb({red},0,{255 - red})")
    return colors


def build_records_table(
    records: Sequence[RunRecord],
    checks: Optional[Sequence[RunCheck]] = None,
    *,
    title: str = "MPT runs",
) -> Table:
    table = Table(title=title, show_lines=False)
    table.add_column("J", justify="right")
    table.add_column("N", justify="right")
    table.add_column("Formulation", style="cyan")
    table.add_column("K", style="magenta")
    table.add_column("ξ", style="magenta")
    table.add_column("Iterations", justify="right")
    table.add_column("cond est.", justify="right")
    table.add_column("λ_min", justify="right")
    table.add_column("λ_max", justify="right")
    if checks is not None:
        table.add_column("Status", style="green")
        table.add_column("Reasons", style="yellow")

    for index, record in enumerate(records):
        row = [
            str(record.j_count),
            str(record.n),
            record.formulation,
            ", ".join(f"{value:g}" for value in record.k),
            ", ".join(f"{first}-{second}={value:g}" for (first, second), value in record.xi_pairs) or "—",
            str(record.iterations),
            _short(record.cond_est),
            _short(record.lambda_min_est),
            _short(record.lambda_max_est),
        ]
        if checks is not None:
            check = checks[index]
            row.extend([check.status, ", ".join(check.reasons) or "—"])
        table.add_row(*row)
    return table


def build_oracle_table(report: OracleReport) -> Table:
    table = Table(title=f"Dense oracle ({report.formulation}, N={report.n}, {report.dimension} dofs)")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", justify="right")
    rows = [
        ("λ_min(B⁻¹A)", report.lambda_min),
        ("λ_max(B⁻¹A)", report.lambda_max),
        ("cond(B⁻¹A)", report.cond),
        ("C_Ω (discrete)", report.c_omega),
        ("α (coercivity)", report.bounds.alpha),
        ("β (continuity)", report.bounds.beta),
        ("β/α", report.bounds.cond_bound),
    ]
    if report.closed_form_cond is not None:
        rows.append(("(λ_min,h + 2ξ)/λ_min,h", report.closed_form_cond))
    for label, value in rows:
        table.add_row(label, f"{value:.6g}")
    return table


def _short(value: Optional[float]) -> str:
    return "—" if value is None else f"{value:.4g}"
