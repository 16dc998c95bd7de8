"""Time loop: TVD-RK2 bootstrap followed by Crank-Nicolson leap-frog steps.

Each CNLF step solves ``(I - dt L) F^{n+1} = (I + dt L - eps h^4/16 M) F^{n-1}
+ 2 dt Q^n`` with MALS, the collision term ``Q^n`` being evaluated once on
``F^n`` and reused by the leap-frog warm start.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from time import perf_counter
from typing import Callable, Iterable, Iterator, Literal, Sequence

import numpy as np

from .bgk_model import (
    StepOperators,
    build_collision_term,
    build_step_operators,
    conserved_totals,
    density_total_variation,
    raw_moments,
)
from .config import BgkConfig
from .dense_oracle import DenseState
from .diagnostics import RunDiagnostics, StepRecord
from .errors import AptError, SolverDivergenceError, attach_diagnostics
from .linsolve import MalsReport, MalsSettings, mals_solve
from .tt_core import DenseTensor, TtTensor, tt_from_dense, tt_norm, tt_round, tt_sum
from .tt_operator import op_apply

_LOGGER = logging.getLogger(__name__)

WarmStart = Literal["leapfrog", "previous", "random"]
StepCallback = Callable[[StepRecord], None]


@dataclass(frozen=True, slots=True)
class SimulationState:
    """The two time levels the leap-frog scheme carries forward."""

    f_prev: TtTensor
    f_curr: TtTensor
    step: int
    time: float

    def __post_init__(self) -> None:
        if self.f_prev.mode_sizes != self.f_curr.mode_sizes:
            raise ValueError(
                f"time levels disagree on modes: {self.f_prev.mode_sizes} vs {self.f_curr.mode_sizes}"
            )


def _rate(f: TtTensor, cfg: BgkConfig, ops: StepOperators) -> TtTensor:
    transported = op_apply(ops.transport, f)
    if not ops.collision:
        return transported
    return transported + build_collision_term(f, cfg)


def bootstrap_first_step(
    f0: TtTensor,
    cfg: BgkConfig,
    ops: StepOperators | None = None,
    *,
    dt: float | None = None,
) -> TtTensor:
    """Two-stage TVD Runge-Kutta step, rounded at ``eps_b`` after each stage.

    ``dt`` defaults to ``cfg.dt``; a shorter value closes a run whose end time
    is not a multiple of the step.
    """

    ops = ops or build_step_operators(cfg)
    step = cfg.dt if dt is None else dt
    stage = tt_round(f0 + _rate(f0, cfg, ops) * step, cfg.eps_b)
    combined = tt_sum([f0 * 0.5, stage * 0.5, _rate(stage, cfg, ops) * (0.5 * step)])
    return tt_round(combined, cfg.eps_b)


def _random_like(f: TtTensor, rng: np.random.Generator) -> TtTensor:
    cores = tuple(rng.standard_normal(core.shape) for core in f.cores)
    guess = TtTensor(cores)
    scale = tt_norm(f) / max(tt_norm(guess), 1e-300)
    return guess * scale


def cnlf_step(
    state: SimulationState,
    cfg: BgkConfig,
    ops: StepOperators,
    *,
    warm_start: WarmStart = "leapfrog",
    rng: np.random.Generator | None = None,
    logger: logging.Logger | None = None,
) -> tuple[TtTensor, MalsReport]:
    """Advance ``state`` by one leap-frog step.

    Raises :class:`SolverDivergenceError` when MALS stops above ``eps_d``.
    """

    log = logger or _LOGGER
    two_dt = 2.0 * cfg.dt
    collision = build_collision_term(state.f_curr, cfg) if ops.collision else None

    rhs = op_apply(ops.rhs, state.f_prev)
    if collision is not None:
        rhs = rhs + collision * two_dt
    rhs = tt_round(rhs, cfg.eps_b)

    if warm_start == "leapfrog":
        slope = op_apply(ops.transport, state.f_curr)
        if collision is not None:
            slope = slope + collision
        guess = tt_round(state.f_prev + slope * two_dt, cfg.eps_b)
    elif warm_start == "previous":
        guess = state.f_curr
    elif warm_start == "random":
        guess = _random_like(state.f_curr, rng or np.random.default_rng())
    else:
        raise ValueError(f"unknown warm start {warm_start!r}")

    settings = MalsSettings(eps_d=cfg.eps_d, max_sweeps=cfg.max_sweeps)
    solution, report = mals_solve(ops.lhs, rhs, guess, settings, logger=log)
    if not report.converged:
        raise SolverDivergenceError(report, step=state.step + 1)
    return tt_round(solution, cfg.eps_b), report


def _relative_error(f: TtTensor, reference: DenseState) -> float:
    expected = reference.f.values
    scale = float(np.linalg.norm(expected))
    gap = float(np.linalg.norm(f.full() - expected))
    return gap / scale if scale > 0.0 else gap


def _make_record(
    f: TtTensor,
    cfg: BgkConfig,
    *,
    step: int,
    time: float,
    report: MalsReport | None,
    started: float,
    reference: Iterator[DenseState] | None,
) -> StepRecord:
    raw = raw_moments(f, cfg)
    mass, momentum, energy = conserved_totals(raw, cfg)
    rel_err = None
    if reference is not None:
        expected = next(reference, None)
        if expected is None or expected.step != step:
            raise ValueError(f"reference trajectory is not aligned with step {step}")
        rel_err = _relative_error(f, expected)
    return StepRecord(
        step=step,
        time=time,
        rank_max=f.max_rank,
        rank_avg=f.mean_rank,
        mals_sweeps=report.sweeps_used if report is not None else 0,
        mals_residual=report.final_residual if report is not None else 0.0,
        mass=mass,
        momentum=momentum,
        energy=energy,
        density_tv=density_total_variation(raw.rho),
        wall_ms=1000.0 * (perf_counter() - started),
        rel_err_oracle=rel_err,
    )


def iter_simulation(
    f0: TtTensor | DenseTensor,
    cfg: BgkConfig,
    *,
    ops: StepOperators | None = None,
    reference: Iterable[DenseState] | None = None,
    warm_start: WarmStart = "leapfrog",
    rng: np.random.Generator | None = None,
    logger: logging.Logger | None = None,
) -> Iterator[tuple[StepRecord, SimulationState]]:
    """Yield one record per time level, starting with the compressed initial field.

    ``reference`` is an aligned dense trajectory (for example
    :func:`aptt_kit.dense_oracle.dense_cnlf_run`) used to fill
    ``rel_err_oracle``.
    """

    log = logger or _LOGGER
    started = perf_counter()
    if isinstance(f0, DenseTensor):
        f_start = tt_from_dense(f0, cfg.eps_b)
    else:
        f_start = tt_round(f0, cfg.eps_b)
    if f_start.mode_sizes != cfg.mode_sizes:
        raise ValueError(f"expected modes {cfg.mode_sizes}, got {f_start.mode_sizes}")
    ops = ops or build_step_operators(cfg)
    ref_iter = iter(reference) if reference is not None else None
    full, remainder = cfg.schedule()

    def emit(state: SimulationState, report: MalsReport | None, t0: float) -> tuple[StepRecord, SimulationState]:
        record = _make_record(
            state.f_curr, cfg, step=state.step, time=state.time, report=report, started=t0, reference=ref_iter
        )
        log.info(
            "step %d t=%.4f rank_max=%d sweeps=%d residual=%.2e",
            record.step,
            record.time,
            record.rank_max,
            record.mals_sweeps,
            record.mals_residual,
        )
        return record, state

    state = SimulationState(f_start, f_start, 0, 0.0)
    yield emit(state, None, started)

    if full >= 1:
        t0 = perf_counter()
        state = SimulationState(f_start, bootstrap_first_step(f_start, cfg, ops), 1, cfg.dt)
        yield emit(state, None, t0)

    for n in range(1, full):
        t0 = perf_counter()
        f_next, report = cnlf_step(state, cfg, ops, warm_start=warm_start, rng=rng, logger=log)
        state = SimulationState(state.f_curr, f_next, n + 1, (n + 1) * cfg.dt)
        yield emit(state, report, t0)

    if remainder > 0.0:
        log.warning("t_star is not a multiple of dt; closing with a TVD-RK2 step of %.3g", remainder)
        t0 = perf_counter()
        f_last = bootstrap_first_step(state.f_curr, cfg, ops, dt=remainder)
        state = SimulationState(state.f_curr, f_last, full + 1, cfg.t_star)
        yield emit(state, None, t0)


def run_simulation(
    f0: TtTensor | DenseTensor,
    cfg: BgkConfig,
    callbacks: Sequence[StepCallback] = (),
    **options: object,
) -> tuple[RunDiagnostics, TtTensor]:
    """Run to ``t_star`` and return the diagnostics and the final field.

    Keyword options are passed to :func:`iter_simulation`.  An abort re-raises
    the error with the partial diagnostics attached.
    """

    diagnostics = RunDiagnostics(cfg.dim)
    final: TtTensor | None = None
    _LOGGER.info("starting run: D=%d m=%d dt=%g t_star=%g", cfg.dim, cfg.m, cfg.dt, cfg.t_star)
    try:
        for record, state in iter_simulation(f0, cfg, **options):  # type: ignore[arg-type]
            diagnostics.append(record)
            final = state.f_curr
            for callback in callbacks:
                callback(record)
    except AptError as exc:
        raise attach_diagnostics(exc, diagnostics)
    assert final is not None
    diagnostics.summary.update(
        steps=diagnostics.records[-1].step,
        rank_max=diagnostics.max_rank(),
        rank_avg=diagnostics.average_rank(),
    )
    _LOGGER.info("run finished after %d steps, max rank %d", diagnostics.records[-1].step, diagnostics.max_rank())
    return diagnostics, final


__all__ = [
    "SimulationState",
    "StepCallback",
    "WarmStart",
    "bootstrap_first_step",
    "cnlf_step",
    "iter_simulation",
    "run_simulation",
]
