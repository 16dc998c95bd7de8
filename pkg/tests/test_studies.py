from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import pytest

from aptt_kit.config import load_config, make_config
from aptt_kit.diagnostics import RunDiagnostics
from aptt_kit.errors import ConfigError
from aptt_kit.field_io import read_dense_dump, read_tt_dump, write_tt_dump
from aptt_kit.reporting import convergence_table, render_text
from aptt_kit.scenarios import get_scenario
from aptt_kit.studies import (
    CONFIG_FILE,
    DIAGNOSTICS_FILE,
    FIELD_FILE,
    ORACLE_FIELD_FILE,
    SUMMARY_JSON,
    SUMMARY_TEXT,
    convergence_study,
    level_config,
    load_initial_field,
    run_scenario,
)


def test_run_scenario_writes_artefacts(tmp_path: Path) -> None:
    cfg = make_config(dim=1, m=8, dt=0.02, t_star=0.06, eps_b=1e-8, eps_d=1e-8, closure="conservative")
    outcome = run_scenario(cfg, get_scenario("trig"), tmp_path / "trig", compare_oracle=True)
    assert outcome.ok
    out = tmp_path / "trig"
    for name in (CONFIG_FILE, DIAGNOSTICS_FILE, FIELD_FILE, SUMMARY_JSON, SUMMARY_TEXT):
        assert (out / name).is_file()

    reloaded, scenario = load_config(out / CONFIG_FILE)
    assert reloaded == cfg
    assert scenario.name == "trig"

    diagnostics = RunDiagnostics.read_csv(out / DIAGNOSTICS_FILE)
    assert [r.step for r in diagnostics.records] == [0, 1, 2, 3]
    assert diagnostics.max_oracle_error() is not None

    field, dim = read_tt_dump(out / FIELD_FILE)
    assert dim == 1
    assert field.mode_sizes == (8, 8)
    oracle, oracle_dim = read_dense_dump(out / ORACLE_FIELD_FILE)
    assert oracle_dim == 1
    assert np.linalg.norm(field.full() - oracle.values) <= 1e-6 * np.linalg.norm(oracle.values)

    summary = json.loads((out / SUMMARY_JSON).read_text("utf-8"))
    assert summary["status"] == "ok"
    assert summary["steps"] == 3
    assert summary["conservation"]["mass"]["normalized"] < 1e-6
    assert "conservation drift" in (out / SUMMARY_TEXT).read_text("utf-8")


def test_run_scenario_reports_abort(tmp_path: Path) -> None:
    cfg = make_config(dim=2, m=8, dt=0.05, t_star=0.2, eps_b=1e-10, eps_d=1e-30, max_sweeps=1)
    outcome = run_scenario(cfg, get_scenario("trig"), tmp_path)
    assert outcome.exit_code == 3
    assert outcome.summary["status"] == "aborted"
    assert "did not converge" in outcome.summary["reason"]
    assert (tmp_path / DIAGNOSTICS_FILE).is_file()
    assert not (tmp_path / FIELD_FILE).exists()
    assert len(RunDiagnostics.read_csv(tmp_path / DIAGNOSTICS_FILE).records) == 2


def test_oracle_size_limit_is_a_config_abort(tmp_path: Path) -> None:
    cfg = make_config(dim=3, m=16, t_star=0.01)
    outcome = run_scenario(cfg, get_scenario("trig"), tmp_path, compare_oracle=True)
    assert outcome.exit_code == 2
    assert "dense oracle" in outcome.summary["reason"]


def test_discontinuous_without_dissipation_warns(tmp_path: Path, caplog: pytest.LogCaptureFixture) -> None:
    cfg = make_config(dim=1, m=8, dt=0.01, t_star=0.01)
    caplog.set_level(logging.WARNING)
    run_scenario(cfg, get_scenario("discontinuous"), tmp_path)
    assert "dissipation is off" in caplog.text


def test_level_config() -> None:
    level = level_config(make_config(dim=1, m=8, kn=2.0), 32)
    assert level.m == 32
    assert level.dt == pytest.approx(1.0 / 128.0)
    assert level.kn == 2.0


@pytest.mark.parametrize(
    ("m_list", "reference_m"),
    [([], None), ([16, 8], None), ([8, 12], 32), ([8, 16], 16)],
)
def test_convergence_study_validation(m_list: list[int], reference_m: int | None) -> None:
    with pytest.raises(ConfigError):
        convergence_study(get_scenario("trig"), m_list, make_config(dim=1), reference_m=reference_m)


def test_dense_and_tt_studies_agree(caplog: pytest.LogCaptureFixture) -> None:
    cfg = make_config(dim=1, t_star=0.05, eps_b=1e-10, eps_d=1e-10)
    caplog.set_level(logging.WARNING)
    dense = convergence_study(get_scenario("trig"), [8, 16], cfg, engine="dense", reference_m=32)
    tt = convergence_study(get_scenario("trig"), [8, 16], cfg, engine="tt", reference_m=32)
    assert "scaled down" in caplog.text
    assert dense.scaled_down
    assert [row.m for row in dense.rows] == [8, 16]
    assert dense.rows[0].order is None
    assert dense.rows[1].error < dense.rows[0].error
    for a, b in zip(dense.rows, tt.rows):
        assert b.error == pytest.approx(a.error, rel=1e-3)
    payload = dense.to_dict()
    assert payload["reference_m"] == 32
    assert len(payload["rows"]) == 2
    assert "scaled down" in render_text(convergence_table(dense))


def test_run_without_oracle_writes_no_oracle_field(tmp_path: Path, caplog: pytest.LogCaptureFixture) -> None:
    cfg = make_config(dim=1, m=8, dt=0.02, t_star=0.04)
    caplog.set_level(logging.DEBUG, logger="aptt_kit.studies")
    outcome = run_scenario(cfg, get_scenario("uniform"), tmp_path)
    assert outcome.ok
    assert (tmp_path / FIELD_FILE).is_file()
    assert not (tmp_path / ORACLE_FIELD_FILE).exists()
    assert "final field:" in caplog.text
    assert "max_rank=" in caplog.text


def test_restart_from_final_field(tmp_path: Path) -> None:
    cfg = make_config(dim=1, m=8, dt=0.02, t_star=0.04, eps_b=1e-10, eps_d=1e-10)
    first = run_scenario(cfg, get_scenario("trig"), tmp_path / "first")
    assert first.ok
    restart = load_initial_field(tmp_path / "first" / FIELD_FILE, cfg)
    second = run_scenario(cfg, get_scenario("trig"), tmp_path / "second", initial=restart)
    assert second.ok
    assert second.diagnostics.records[0].mass == pytest.approx(first.diagnostics.records[-1].mass, rel=1e-8)


def test_initial_field_must_match_grid(tmp_path: Path) -> None:
    dump = tmp_path / "field.bin"
    write_tt_dump(dump, get_scenario("trig").initial_tt(make_config(dim=1, m=8)), 1)
    with pytest.raises(ConfigError, match="config expects"):
        load_initial_field(dump, make_config(dim=1, m=16))
