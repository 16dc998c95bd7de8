from __future__ import annotations

import json
from pathlib import Path

import pytest

from aptt import main
from aptt_kit.config import make_config
from aptt_kit.field_io import write_dense_dump, write_tt_dump
from aptt_kit.scenarios import get_scenario
from aptt_kit.tt_core import tt_scale

SMALL_RUN = ["run", "--scenario", "trig", "--dim", "1", "--m", "8", "--dt", "0.02", "--t-star", "0.04"]


def test_run_succeeds(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    out = tmp_path / "run"
    assert main([*SMALL_RUN, "--eps-b", "1e-8", "--eps-d", "1e-8", "--out", str(out)]) == 0
    assert "conservation drift" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text("utf-8"))
    assert summary["status"] == "ok"
    assert summary["config"]["m"] == 8


def test_invalid_m_is_exit_2(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["run", "--m", "0", "--out", str(tmp_path)]) == 2
    assert "m >= 4" in capsys.readouterr().err


def test_unknown_scenario_is_exit_2(tmp_path: Path) -> None:
    assert main(["run", "--scenario", "vortex", "--out", str(tmp_path)]) == 2


def test_bad_flag_type_is_usage_error(tmp_path: Path) -> None:
    assert main(["run", "--m", "many", "--out", str(tmp_path)]) == 2


def test_config_file_and_flags(tmp_path: Path) -> None:
    config = tmp_path / "run.cfg"
    config.write_text("dim=1\nm=16\ndt=0.02\nt_star=0.02\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--m", "8", "--out", str(out)]) == 0
    assert "m=8" in (out / "config.txt").read_text("utf-8")


def test_solver_abort_is_exit_3(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    args = [*SMALL_RUN, "--dim", "2", "--eps-d", "1e-30", "--max-sweeps", "1", "--out", str(tmp_path)]
    assert main(args) == 3
    assert "run aborted" in capsys.readouterr().err
    assert (tmp_path / "diagnostics.csv").is_file()


def test_unwritable_output_is_exit_5(tmp_path: Path) -> None:
    blocker = tmp_path / "occupied"
    blocker.write_text("not a directory", encoding="utf-8")
    assert main([*SMALL_RUN, "--out", str(blocker)]) == 5


def test_report_command(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    out = tmp_path / "run"
    assert main([*SMALL_RUN, "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["report", str(out / "diagnostics.csv")]) == 0
    text = capsys.readouterr().out
    assert "rank_max" in text
    assert "momentum_1" in text


def test_report_missing_file_is_exit_5(tmp_path: Path) -> None:
    assert main(["report", str(tmp_path / "absent.csv")]) == 5


def test_convergence_command_writes_json(tmp_path: Path) -> None:
    target = tmp_path / "study.json"
    args = [
        "convergence",
        "--m-list",
        "8,16",
        "--reference-m",
        "32",
        "--engine",
        "dense",
        "--dim",
        "1",
        "--t-star",
        "0.05",
        "--out",
        str(target),
    ]
    assert main(args) == 0
    payload = json.loads(target.read_text("utf-8"))
    assert [row["m"] for row in payload["rows"]] == [8, 16]


def test_convergence_rejects_bad_m_list() -> None:
    assert main(["convergence", "--m-list", "8,x"]) == 2


def test_negative_initial_density_is_exit_4(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    cfg = make_config(dim=1, m=8)
    dump = tmp_path / "negative.bin"
    write_tt_dump(dump, tt_scale(get_scenario("trig").initial_tt(cfg), -1.0), 1)
    assert main([*SMALL_RUN, "--initial", str(dump), "--out", str(tmp_path / "out")]) == 4
    assert "density" in capsys.readouterr().err
    summary = json.loads((tmp_path / "out" / "summary.json").read_text("utf-8"))
    assert summary["exit_code"] == 4


def test_restart_from_dense_dump(tmp_path: Path) -> None:
    cfg = make_config(dim=1, m=8)
    dump = tmp_path / "start.bin"
    write_dense_dump(dump, get_scenario("relaxation").initial_dense(cfg), 1)
    assert main([*SMALL_RUN, "--initial", str(dump), "--out", str(tmp_path / "out")]) == 0


def test_initial_field_on_another_grid_is_exit_2(tmp_path: Path) -> None:
    cfg = make_config(dim=1, m=16)
    dump = tmp_path / "coarse.bin"
    write_tt_dump(dump, get_scenario("trig").initial_tt(cfg), 1)
    assert main([*SMALL_RUN, "--initial", str(dump), "--out", str(tmp_path / "out")]) == 2


def test_missing_initial_field_is_exit_5(tmp_path: Path) -> None:
    assert main([*SMALL_RUN, "--initial", str(tmp_path / "absent.bin"), "--out", str(tmp_path)]) == 5
