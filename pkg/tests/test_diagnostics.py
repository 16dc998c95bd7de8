from __future__ import annotations

from pathlib import Path

import pytest
from jsonschema import ValidationError

from aptt_kit.diagnostics import (
    RunDiagnostics,
    StepRecord,
    conservation_from_series,
    conservation_report,
    csv_columns,
    validate_record,
)
from aptt_kit.errors import FieldIOError


def _record(step: int, *, mass: float = 4.0, momentum: tuple[float, ...] = (0.0, 0.0), oracle: float | None = None) -> StepRecord:
    return StepRecord(
        step=step,
        time=0.01 * step,
        rank_max=3 + step,
        rank_avg=2.0 + 0.5 * step,
        mals_sweeps=2 if step > 1 else 0,
        mals_residual=1e-7 if step > 1 else 0.0,
        mass=mass,
        momentum=momentum,
        energy=10.0,
        density_tv=1.5,
        wall_ms=3.2,
        rel_err_oracle=oracle,
    )


def test_csv_columns() -> None:
    assert csv_columns(2, False) == [
        "step",
        "time",
        "rank_max",
        "rank_avg",
        "mals_sweeps",
        "mals_residual",
        "mass",
        "momentum_1",
        "momentum_2",
        "energy",
        "density_tv",
        "wall_ms",
    ]
    assert csv_columns(1, True)[-2:] == ["rel_err_oracle", "wall_ms"]


def test_schema_accepts_records_and_rejects_garbage() -> None:
    validate_record(_record(3).to_payload())
    validate_record(_record(3, oracle=1e-9).to_payload())
    payload = _record(3).to_payload()
    payload["rank_max"] = 0
    with pytest.raises(ValidationError):
        validate_record(payload)
    payload = _record(3).to_payload()
    payload["extra"] = 1
    with pytest.raises(ValidationError):
        validate_record(payload)


def test_append_enforces_order_and_dimension() -> None:
    diag = RunDiagnostics(2)
    diag.append(_record(0))
    diag.append(_record(1))
    with pytest.raises(ValueError, match="does not follow"):
        diag.append(_record(1))
    with pytest.raises(ValueError, match="momentum components"):
        diag.append(_record(2, momentum=(0.0,)))


def test_csv_round_trip(tmp_path: Path) -> None:
    diag = RunDiagnostics(2)
    for step in range(4):
        diag.append(_record(step, oracle=1e-8 * step))
    path = tmp_path / "diagnostics.csv"
    diag.write_csv(path)
    header = path.read_text("utf-8").splitlines()[0]
    assert header.split(",") == csv_columns(2, True)
    loaded = RunDiagnostics.read_csv(path)
    assert loaded.records == diag.records
    assert loaded.max_oracle_error() == pytest.approx(3e-8)


def test_csv_without_oracle_column(tmp_path: Path) -> None:
    diag = RunDiagnostics(1)
    diag.append(_record(0, momentum=(0.5,)))
    path = tmp_path / "diagnostics.csv"
    diag.write_csv(path)
    assert "rel_err_oracle" not in path.read_text("utf-8")
    assert RunDiagnostics.read_csv(path).records[0].rel_err_oracle is None


def test_read_csv_rejects_foreign_files(tmp_path: Path) -> None:
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(FieldIOError):
        RunDiagnostics.read_csv(path)
    with pytest.raises(FieldIOError):
        RunDiagnostics.read_csv(tmp_path / "absent.csv")


def test_rank_summaries() -> None:
    diag = RunDiagnostics(2)
    for step in range(3):
        diag.append(_record(step))
    assert diag.max_rank() == 5
    assert diag.average_rank() == pytest.approx(2.75)
    assert diag.tv_growth() == pytest.approx(1.0)
    assert diag.max_oracle_error() is None


def test_conservation_drifts() -> None:
    report = conservation_from_series(
        [2.0, 2.0 + 1e-10, 2.0 - 3e-10],
        [(0.0,), (1e-11,), (-2e-11,)],
        [5.0, 5.0, 5.5],
    )
    mass = report.by_name("mass")
    assert mass.max_drift == pytest.approx(3e-10)
    assert mass.normalized == pytest.approx(1.5e-10)
    momentum = report.by_name("momentum_1")
    assert momentum.absolute
    assert momentum.max_drift == pytest.approx(2e-11)
    assert report.by_name("energy").normalized == pytest.approx(0.1)
    assert report.worst() == pytest.approx(0.5)
    with pytest.raises(KeyError):
        report.by_name("entropy")


def test_conservation_report_from_diagnostics() -> None:
    diag = RunDiagnostics(2)
    diag.append(_record(0))
    diag.append(_record(1, mass=4.0 + 4e-9))
    report = conservation_report(diag)
    assert [q.name for q in report.quantities] == ["mass", "momentum_1", "momentum_2", "energy"]
    assert report.by_name("mass").normalized == pytest.approx(1e-9)
    assert report.to_dict()["energy"]["max_drift"] == 0.0
