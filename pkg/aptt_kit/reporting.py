"""Rich tables for run summaries, conservation reports and convergence studies."""
from __future__ import annotations

import io
from typing import TYPE_CHECKING, Any, Mapping

from rich.console import Console, RenderableType
from rich.table import Table

from .diagnostics import ConservationReport

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .studies import ConvergenceTable


def _fmt(value: Any) -> str:
    if value is None:
        return "N/A"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def summary_table(summary: Mapping[str, Any]) -> Table:
    table = Table(title=f"aptt run: {summary.get('scenario', '?')}")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    for key in ("status", "exit_code", "reason", "steps", "time", "rank_max", "rank_avg", "tv_growth", "max_oracle_error"):
        if key in summary:
            table.add_row(key, _fmt(summary[key]))
    return table


def conservation_table(report: ConservationReport) -> Table:
    table = Table(title="conservation drift")
    table.add_column("quantity")
    table.add_column("initial", justify="right")
    table.add_column("max drift", justify="right")
    table.add_column("relative", justify="right")
    for quantity in report.quantities:
        relative = "absolute" if quantity.absolute else _fmt(quantity.normalized)
        table.add_row(quantity.name, _fmt(quantity.initial), _fmt(quantity.max_drift), relative)
    return table


def convergence_table(study: ConvergenceTable) -> Table:
    title = f"convergence ({study.engine}, {study.scenario}, reference m={study.reference_m})"
    table = Table(title=title)
    table.add_column("m", justify="right")
    table.add_column("dt", justify="right")
    table.add_column("L2 error", justify="right")
    table.add_column("order", justify="right")
    for row in study.rows:
        table.add_row(str(row.m), _fmt(row.dt), _fmt(row.error), _fmt(row.order))
    if study.scaled_down:
        table.caption = f"reference level scaled down to m={study.reference_m}"
    return table


def render_text(*renderables: RenderableType, width: int = 100) -> str:
    """Render tables to plain text (no colour codes)."""

    console = Console(file=io.StringIO(), width=width, color_system=None, record=True)
    for renderable in renderables:
        console.print(renderable)
    return console.export_text()


__all__ = ["conservation_table", "convergence_table", "render_text", "summary_table"]
