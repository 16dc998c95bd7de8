"""Scenario runs with on-disk artefacts and grid-convergence studies."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from math import log
from pathlib import Path
from typing import Any, Iterable, Iterator, Literal, Sequence

import numpy as np

from .config import BgkConfig, dump_config, make_config
from .dense_oracle import DenseState, check_dense_size, dense_cnlf_run
from .diagnostics import RunDiagnostics, conservation_report
from .errors import AptError, ConfigError, FieldIOError
from .field_io import read_field_dump, write_dense_dump, write_tt_dump
from .integrator import WarmStart, run_simulation
from .reporting import conservation_table, render_text, summary_table
from .scenarios import Scenario
from .tt_core import DenseTensor, TtTensor, describe, tt_from_dense, tt_norm, tt_restrict

_LOGGER = logging.getLogger(__name__)

DIAGNOSTICS_FILE = "diagnostics.csv"
FIELD_FILE = "final_field.bin"
ORACLE_FIELD_FILE = "oracle_field.bin"
SUMMARY_JSON = "summary.json"
SUMMARY_TEXT = "summary.txt"
CONFIG_FILE = "config.txt"
FULL_REFERENCE_M = 256


@dataclass(slots=True)
class RunOutcome:
    exit_code: int
    diagnostics: RunDiagnostics
    summary: dict[str, Any]
    paths: dict[str, Path] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.exit_code == 0


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise FieldIOError(f"cannot write {path}: {exc}") from exc


def load_initial_field(path: str | Path, cfg: BgkConfig) -> TtTensor:
    """Read a TT or dense field dump to restart from; it must match the config grid."""

    loaded, dim = read_field_dump(path)
    if dim != cfg.dim or loaded.mode_sizes != cfg.mode_sizes:
        raise ConfigError(
            f"initial field {path} has D={dim} modes {loaded.mode_sizes}, "
            f"config expects D={cfg.dim} modes {cfg.mode_sizes}",
            field="initial",
        )
    if isinstance(loaded, DenseTensor):
        return tt_from_dense(loaded, cfg.eps_b)
    return loaded


def _keep_last(states: Iterable[DenseState], last: list[DenseState]) -> Iterator[DenseState]:
    for state in states:
        last[:] = [state]
        yield state


def run_scenario(
    cfg: BgkConfig,
    scenario: Scenario,
    out_dir: str | Path,
    *,
    compare_oracle: bool = False,
    warm_start: WarmStart = "leapfrog",
    initial: TtTensor | None = None,
) -> RunOutcome:
    """Run ``scenario`` and write the diagnostics CSV, field dump and summaries.

    ``initial`` replaces the scenario's initial field, for example a restart
    read by :func:`load_initial_field`.  With ``compare_oracle`` the final dense
    field is dumped next to the TT one.

    Simulation aborts are caught and reported through ``exit_code``; whatever
    diagnostics were gathered before the abort are still written.  Failures to
    write the artefacts raise :class:`FieldIOError`.
    """

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FieldIOError(f"cannot create output directory {out}: {exc}") from exc
    paths = {"config": out / CONFIG_FILE}
    _write_text(paths["config"], dump_config(cfg, scenario.name))

    if scenario.name == "discontinuous" and cfg.eps_diss == 0.0:
        _LOGGER.warning("artificial dissipation is off for discontinuous data; expect oscillations")

    exit_code = 0
    reason: str | None = None
    final: TtTensor | None = None
    oracle_last: list[DenseState] = []
    try:
        f0 = initial if initial is not None else scenario.initial_tt(cfg)
        reference = None
        if compare_oracle:
            check_dense_size(cfg)
            dense0 = initial.to_dense() if initial is not None else scenario.initial_dense(cfg)
            reference = _keep_last(dense_cnlf_run(dense0, cfg), oracle_last)
        diagnostics, final = run_simulation(f0, cfg, reference=reference, warm_start=warm_start)
    except AptError as exc:
        _LOGGER.error("run aborted: %s", exc)
        exit_code, reason = exc.exit_code, str(exc)
        diagnostics = exc.diagnostics if isinstance(exc.diagnostics, RunDiagnostics) else RunDiagnostics(cfg.dim)

    if diagnostics.records:
        paths["diagnostics"] = out / DIAGNOSTICS_FILE
        diagnostics.write_csv(paths["diagnostics"])
    if final is not None:
        paths["field"] = out / FIELD_FILE
        write_tt_dump(paths["field"], final, cfg.dim)
        _LOGGER.debug("final field:\n%s", describe(final))
        if oracle_last:
            paths["oracle_field"] = out / ORACLE_FIELD_FILE
            write_dense_dump(paths["oracle_field"], oracle_last[0].f, cfg.dim)

    conservation = conservation_report(diagnostics)
    summary: dict[str, Any] = {
        "scenario": scenario.name,
        "status": "ok" if exit_code == 0 else "aborted",
        "exit_code": exit_code,
        "reason": reason,
        "steps": diagnostics.records[-1].step if diagnostics.records else 0,
        "time": diagnostics.records[-1].time if diagnostics.records else 0.0,
        "rank_max": diagnostics.max_rank(),
        "rank_avg": diagnostics.average_rank(),
        "tv_growth": diagnostics.tv_growth(),
        "max_oracle_error": diagnostics.max_oracle_error(),
        "conservation": conservation.to_dict(),
        "config": cfg.model_dump(),
    }
    diagnostics.summary.update(summary)

    paths["summary_json"] = out / SUMMARY_JSON
    paths["summary_text"] = out / SUMMARY_TEXT
    _write_text(paths["summary_json"], json.dumps(summary, indent=2) + "\n")
    _write_text(paths["summary_text"], render_text(summary_table(summary), conservation_table(conservation)))
    return RunOutcome(exit_code, diagnostics, summary, paths)


@dataclass(frozen=True, slots=True)
class ConvergenceRow:
    m: int
    dt: float
    error: float
    order: float | None


@dataclass(frozen=True, slots=True)
class ConvergenceTable:
    scenario: str
    engine: str
    reference_m: int
    rows: tuple[ConvergenceRow, ...]
    noise_floor: float

    @property
    def scaled_down(self) -> bool:
        return self.reference_m < FULL_REFERENCE_M

    def orders(self) -> list[float | None]:
        return [row.order for row in self.rows[1:]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "engine": self.engine,
            "reference_m": self.reference_m,
            "scaled_down": self.scaled_down,
            "noise_floor": self.noise_floor,
            "rows": [
                {"m": row.m, "dt": row.dt, "error": row.error, "order": row.order} for row in self.rows
            ],
        }


def level_config(cfg: BgkConfig, m: int) -> BgkConfig:
    """Config of one refinement level: grid ``m`` with ``dt = 1/(4m)``."""

    return make_config(**{**cfg.model_dump(), "m": m, "dt": 1.0 / (4.0 * m)})


def _final_tt(scenario: Scenario, cfg: BgkConfig) -> TtTensor:
    _, final = run_simulation(scenario.initial_tt(cfg), cfg)
    return final


def _final_dense(scenario: Scenario, cfg: BgkConfig) -> DenseTensor:
    last = None
    for state in dense_cnlf_run(scenario.initial_dense(cfg), cfg):
        last = state
    assert last is not None
    return last.f


def _restricted_gap(
    coarse: TtTensor | DenseTensor, fine: TtTensor | DenseTensor, stride: int
) -> tuple[float, float]:
    if isinstance(coarse, TtTensor) and isinstance(fine, TtTensor):
        restricted = tt_restrict(fine, stride)
        return tt_norm(coarse - restricted), tt_norm(restricted)
    assert isinstance(coarse, DenseTensor) and isinstance(fine, DenseTensor)
    restricted = fine.values[(slice(None, None, stride),) * fine.order]
    return float(np.linalg.norm(coarse.values - restricted)), float(np.linalg.norm(restricted))


def convergence_study(
    scenario: Scenario,
    m_list: Sequence[int],
    cfg: BgkConfig,
    *,
    engine: Literal["tt", "dense"] = "tt",
    reference_m: int | None = None,
) -> ConvergenceTable:
    """Discrete L2 errors ``h^D ||f_m - R f_ref||`` against a refined run.

    ``R`` subsamples the reference onto the coarse grid.  The order column is
    ``log(e_coarse / e_fine) / log(m_fine / m_coarse)`` on the finer row and
    stays ``None`` whenever an error sits below the rounding-noise floor
    ``10 (eps_b + eps_d)`` relative to the reference.
    """

    levels = [int(m) for m in m_list]
    if not levels:
        raise ConfigError("m_list must not be empty", field="m_list")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError(f"m_list must be strictly ascending, got {levels}", field="m_list")
    ref_m = reference_m or 2 * levels[-1]
    if ref_m <= levels[-1] or any(ref_m % m for m in levels):
        raise ConfigError(
            f"reference m={ref_m} must exceed and be a multiple of every level in {levels}",
            field="reference_m",
        )
    if ref_m < FULL_REFERENCE_M:
        _LOGGER.warning("convergence reference scaled down to m=%d (full study uses m=%d)", ref_m, FULL_REFERENCE_M)
    if engine not in ("tt", "dense"):
        raise ConfigError(f"unknown engine {engine!r}", field="engine")

    solve = _final_tt if engine == "tt" else _final_dense
    reference = solve(scenario, level_config(cfg, ref_m))
    floor_factor = 10.0 * (cfg.eps_b + cfg.eps_d)

    rows: list[ConvergenceRow] = []
    noise_floor = 0.0
    previous: tuple[int, float, bool] | None = None
    for m in levels:
        level = level_config(cfg, m)
        _LOGGER.info("convergence level m=%d dt=%.5g (%s)", m, level.dt, engine)
        gap, scale = _restricted_gap(solve(scenario, level), reference, ref_m // m)
        weight = level.h**cfg.dim
        error = weight * gap
        floor = floor_factor * weight * scale
        noise_floor = max(noise_floor, floor)
        resolved = error > floor
        order = None
        if previous is not None:
            prev_m, prev_error, prev_resolved = previous
            if resolved and prev_resolved:
                order = log(prev_error / error) / log(m / prev_m)
        rows.append(ConvergenceRow(m, level.dt, error, order))
        previous = (m, error, resolved)

    return ConvergenceTable(scenario.name, engine, ref_m, tuple(rows), noise_floor)


__all__ = [
    "CONFIG_FILE",
    "ConvergenceRow",
    "ConvergenceTable",
    "DIAGNOSTICS_FILE",
    "FIELD_FILE",
    "ORACLE_FIELD_FILE",
    "RunOutcome",
    "SUMMARY_JSON",
    "SUMMARY_TEXT",
    "convergence_study",
    "level_config",
    "load_initial_field",
    "run_scenario",
]
