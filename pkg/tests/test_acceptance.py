"""End-to-end checks on desk-sized problems.

Everything marked ``slow`` takes minutes and only runs with ``--runslow``.
"""
from __future__ import annotations

from pathlib import Path

import pytest

from aptt_kit.bgk_model import build_dissipation_operator, build_transport_operator
from aptt_kit.config import make_config
from aptt_kit.dense_oracle import dense_cnlf_run, dense_conserved_totals
from aptt_kit.diagnostics import RunDiagnostics, conservation_report
from aptt_kit.integrator import run_simulation
from aptt_kit.scenarios import get_scenario
from aptt_kit.studies import convergence_study, run_scenario
from aptt_kit.tt_operator import op_identity


def _assert_solver_contract(diagnostics: RunDiagnostics, eps_d: float) -> None:
    for record in diagnostics.records:
        assert record.mals_residual <= eps_d, f"step {record.step} residual {record.mals_residual}"


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_operator_ranks_after_rounding(dim: int) -> None:
    cfg = make_config(dim=dim, m=8)
    assert op_identity(cfg.mode_sizes).max_rank == 1
    assert build_transport_operator(cfg).max_rank <= 2 * dim
    assert build_dissipation_operator(cfg).max_rank <= dim


@pytest.mark.slow
def test_tt_pipeline_matches_dense_oracle() -> None:
    cfg = make_config(dim=2, m=8, dt=0.01, t_star=0.1, eps_b=1e-10, eps_d=1e-10)
    scenario = get_scenario("trig")
    diagnostics, _ = run_simulation(
        scenario.initial_tt(cfg), cfg, reference=dense_cnlf_run(scenario.initial_dense(cfg), cfg)
    )
    assert diagnostics.records[-1].step == 10
    assert diagnostics.max_oracle_error() <= 1e-6
    _assert_solver_contract(diagnostics, cfg.eps_d)


@pytest.mark.slow
def test_second_order_convergence() -> None:
    cfg = make_config(dim=2, t_star=0.5, eps_b=1e-7, eps_d=1e-7)
    study = convergence_study(get_scenario("trig"), [8, 16, 32], cfg, reference_m=64)
    orders = study.orders()
    assert all(order is not None for order in orders)
    assert all(1.7 <= order <= 2.5 for order in orders), orders


@pytest.mark.slow
def test_error_tracks_rounding_tolerance() -> None:
    cfg = make_config(dim=2, m=16, t_star=1.0)
    scenario = get_scenario("trig")
    diagnostics, _ = run_simulation(
        scenario.initial_tt(cfg), cfg, reference=dense_cnlf_run(scenario.initial_dense(cfg), cfg)
    )
    assert diagnostics.records[-1].time == pytest.approx(1.0)
    for record in diagnostics.records:
        assert record.rel_err_oracle <= 100 * cfg.eps_b, f"step {record.step}"
    _assert_solver_contract(diagnostics, cfg.eps_d)


@pytest.mark.slow
def test_relaxation_conserves_moments() -> None:
    cfg = make_config(dim=3, m=16, kn=10.0, dt=0.005, t_star=0.25, eps_b=1e-5, eps_d=1e-5)
    diagnostics, _ = run_simulation(get_scenario("relaxation").initial_tt(cfg), cfg)
    assert diagnostics.records[-1].step == 50
    report = conservation_report(diagnostics)
    mass = report.by_name("mass").initial
    for quantity in report.quantities:
        drift = quantity.normalized if quantity.normalized is not None else quantity.max_drift / mass
        assert drift <= 1e-3, quantity


@pytest.mark.slow
def test_dense_conservative_run_is_exactly_conservative() -> None:
    cfg = make_config(dim=2, m=8, kn=10.0, dt=0.005, t_star=0.1, closure="conservative")
    f0 = get_scenario("relaxation").initial_dense(cfg)
    mass0, momentum0, energy0 = dense_conserved_totals(f0, cfg)
    for state in dense_cnlf_run(f0, cfg):
        mass, momentum, energy = dense_conserved_totals(state.f, cfg)
        assert abs(mass - mass0) <= 1e-10 * mass0
        assert abs(energy - energy0) <= 1e-10 * energy0
        for p, p0 in zip(momentum, momentum0):
            assert abs(p - p0) <= 1e-10 * mass0


@pytest.mark.slow
def test_average_rank_insensitive_to_grid() -> None:
    averages = []
    for m in (16, 32):
        cfg = make_config(dim=2, m=m, t_star=0.5)
        diagnostics, _ = run_simulation(get_scenario("trig").initial_tt(cfg), cfg)
        averages.append(diagnostics.average_rank())
    assert 0.7 <= averages[1] / averages[0] <= 1.4, averages


@pytest.mark.slow
def test_dissipation_controls_oscillations(tmp_path: Path) -> None:
    base = {"dim": 2, "m": 16, "kn": 10.0, "dt": 0.002, "t_star": 0.1, "eps_b": 1e-5, "eps_d": 1e-5}
    scenario = get_scenario("discontinuous")
    damped = run_scenario(make_config(**base, eps_diss=0.1), scenario, tmp_path / "damped")
    assert damped.ok
    raw = run_scenario(make_config(**base, eps_diss=0.0), scenario, tmp_path / "raw")
    if raw.exit_code == 4:
        return
    assert raw.ok
    # growth above the initial total variation
    damped_excess = max(damped.summary["tv_growth"] - 1.0, 0.0)
    raw_excess = max(raw.summary["tv_growth"] - 1.0, 0.0)
    assert raw_excess > 0.0
    assert raw_excess >= 10.0 * damped_excess
