"""Command-line front end for the tensor-train BGK solver."""
from __future__ import annotations

import json
import logging
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence

try:  # typer>=0.26 vendors its own click; catch the exceptions it actually raises
    from typer import _click as click
except ImportError:  # pragma: no cover - older typer uses upstream click
    import click
import typer
from rich.console import Console

from aptt_kit.config import load_config
from aptt_kit.diagnostics import RunDiagnostics, conservation_report
from aptt_kit.errors import AptError, FieldIOError, exit_code_for
from aptt_kit.reporting import conservation_table, convergence_table, summary_table
from aptt_kit.scenarios import SCENARIOS
from aptt_kit.studies import convergence_study, load_initial_field, run_scenario

LOGGER = logging.getLogger("aptt")

app = typer.Typer(add_completion=False, no_args_is_help=True, help="Tensor-train solver for the Boltzmann-BGK equation.")
console = Console()
err_console = Console(stderr=True)


class LogLevel(str, Enum):
    CRITICAL = "CRITICAL"
    ERROR = "ERROR"
    WARNING = "WARNING"
    INFO = "INFO"
    DEBUG = "DEBUG"


class Closure(str, Enum):
    maxwellian = "maxwellian"
    conservative = "conservative"


class DissipationAxes(str, Enum):
    space = "space"
    velocity = "velocity"


class WarmStartChoice(str, Enum):
    leapfrog = "leapfrog"
    previous = "previous"
    random = "random"


class Engine(str, Enum):
    tt = "tt"
    dense = "dense"


def _scenario_names() -> str:
    return ", ".join(sorted(SCENARIOS))


@app.callback()
def _configure(
    log_level: LogLevel = typer.Option(LogLevel.INFO, "--log-level", help="Logging level (default: INFO)"),
) -> None:
    logging.basicConfig(
        level=getattr(logging, log_level.value),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )


def _value(option: Enum | None) -> str | None:
    return option.value if option is not None else None


@app.command()
def run(
    scenario: Optional[str] = typer.Option(None, "--scenario", help=f"Initial state ({_scenario_names()})"),
    dim: Optional[int] = typer.Option(None, "--dim", help="Spatial dimension D"),
    m: Optional[int] = typer.Option(None, "--m", help="Grid points per axis"),
    dt: Optional[float] = typer.Option(None, "--dt", help="Time step"),
    t_star: Optional[float] = typer.Option(None, "--t-star", help="Final time"),
    kn: Optional[float] = typer.Option(None, "--kn", help="Knudsen number"),
    bo: Optional[float] = typer.Option(None, "--bo", help="Boltzmann constant scale Bo"),
    eps_b: Optional[float] = typer.Option(None, "--eps-b", help="TT rounding tolerance"),
    eps_d: Optional[float] = typer.Option(None, "--eps-d", help="MALS residual tolerance"),
    dissipation: Optional[float] = typer.Option(None, "--dissipation", help="Artificial dissipation strength"),
    compare_oracle: bool = typer.Option(False, "--compare-oracle", help="Track the error against the dense oracle"),
    out: Path = typer.Option(Path("aptt-out"), "--out", help="Output directory"),
    config: Optional[Path] = typer.Option(None, "--config", help="key=value config file"),
    closure: Optional[Closure] = typer.Option(None, "--closure", help="Equilibrium closure"),
    dissipation_axes: Optional[DissipationAxes] = typer.Option(None, "--dissipation-axes"),
    max_sweeps: Optional[int] = typer.Option(None, "--max-sweeps", help="MALS sweep limit"),
    warm_start: WarmStartChoice = typer.Option(WarmStartChoice.leapfrog, "--warm-start"),
    initial: Optional[Path] = typer.Option(None, "--initial", help="Start from a TT or dense field dump"),
) -> int:
    """Run one scenario and write diagnostics, the final field and a summary."""

    overrides: dict[str, Any] = {
        "dim": dim,
        "m": m,
        "dt": dt,
        "t_star": t_star,
        "kn": kn,
        "bo": bo,
        "eps_b": eps_b,
        "eps_d": eps_d,
        "eps_diss": dissipation,
        "closure": _value(closure),
        "dissipation_axes": _value(dissipation_axes),
        "max_sweeps": max_sweeps,
    }
    cfg, chosen = load_config(config, scenario=scenario, overrides=overrides)
    start = load_initial_field(initial, cfg) if initial is not None else None
    LOGGER.info("running %s with D=%d m=%d into %s", chosen.name, cfg.dim, cfg.m, out)
    outcome = run_scenario(
        cfg, chosen, out, compare_oracle=compare_oracle, warm_start=warm_start.value, initial=start
    )
    console.print(summary_table(outcome.summary))
    console.print(conservation_table(conservation_report(outcome.diagnostics)))
    if not outcome.ok:
        err_console.print(f"run aborted: {outcome.summary['reason']}")
    return outcome.exit_code


def _parse_m_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise typer.BadParameter(f"expected comma-separated integers, got {text!r}") from exc


@app.command()
def convergence(
    m_list: str = typer.Option("8,16,32", "--m-list", help="Comma-separated grid sizes"),
    scenario: str = typer.Option("trig", "--scenario"),
    engine: Engine = typer.Option(Engine.tt, "--engine"),
    reference_m: Optional[int] = typer.Option(None, "--reference-m", help="Reference grid (default 2 max(m))"),
    dim: Optional[int] = typer.Option(None, "--dim"),
    t_star: Optional[float] = typer.Option(None, "--t-star"),
    eps_b: float = typer.Option(1e-7, "--eps-b"),
    eps_d: float = typer.Option(1e-7, "--eps-d"),
    config: Optional[Path] = typer.Option(None, "--config"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the table as JSON"),
) -> int:
    """Self-convergence study with dt = 1/(4m)."""

    levels = _parse_m_list(m_list)
    overrides = {"dim": dim, "t_star": t_star, "eps_b": eps_b, "eps_d": eps_d}
    cfg, chosen = load_config(config, scenario=scenario, overrides=overrides)
    table = convergence_study(chosen, levels, cfg, engine=engine.value, reference_m=reference_m)
    console.print(convergence_table(table))
    if out is not None:
        try:
            out.write_text(json.dumps(table.to_dict(), indent=2) + "\n", encoding="utf-8")
        except OSError as exc:
            raise FieldIOError(f"cannot write {out}: {exc}") from exc
    return 0


@app.command()
def report(csv_path: Path = typer.Argument(..., help="diagnostics.csv from a previous run")) -> int:
    """Summarize ranks and conservation drift of a diagnostics file."""

    diagnostics = RunDiagnostics.read_csv(csv_path)
    records = diagnostics.records
    summary = {
        "scenario": csv_path.parent.name or str(csv_path),
        "steps": records[-1].step if records else 0,
        "time": records[-1].time if records else 0.0,
        "rank_max": diagnostics.max_rank(),
        "rank_avg": diagnostics.average_rank(),
        "tv_growth": diagnostics.tv_growth(),
        "max_oracle_error": diagnostics.max_oracle_error(),
    }
    console.print(summary_table(summary))
    console.print(conservation_table(conservation_report(diagnostics)))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        result = app(args=args, standalone_mode=False, prog_name="aptt")
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:  # pragma: no cover - interactive interrupt
        return 130
    except (AptError, OSError) as exc:
        err_console.print(f"error: {exc}")
        return exit_code_for(exc)
    return result if isinstance(result, int) else 0


if __name__ == "__main__":  # pragma: no cover - CLI entry point
    sys.exit(main())
