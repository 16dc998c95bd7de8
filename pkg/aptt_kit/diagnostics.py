"""Per-step run diagnostics, their CSV form and conservation summaries."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Mapping, Sequence

from jsonschema import Draft202012Validator

from .errors import FieldIOError

_SCHEMA_PATH = Path(__file__).with_name("diagnostics.schema.json")
_BASE_COLUMNS = ("step", "time", "rank_max", "rank_avg", "mals_sweeps", "mals_residual", "mass")
_TAIL_COLUMNS = ("energy", "density_tv")


@lru_cache(maxsize=1)
def load_schema() -> Mapping[str, Any]:
    """Load and cache the diagnostics record schema."""

    return json.loads(_SCHEMA_PATH.read_text("utf-8"))


@lru_cache(maxsize=1)
def _validator() -> Draft202012Validator:
    return Draft202012Validator(load_schema())


def validate_record(payload: Mapping[str, Any]) -> None:
    _validator().validate(payload)


def csv_columns(dim: int, with_oracle: bool) -> list[str]:
    columns = list(_BASE_COLUMNS)
    columns.extend(f"momentum_{i + 1}" for i in range(dim))
    columns.extend(_TAIL_COLUMNS)
    if with_oracle:
        columns.append("rel_err_oracle")
    columns.append("wall_ms")
    return columns


@dataclass(frozen=True, slots=True)
class StepRecord:
    """Diagnostics for the field at time level ``step``."""

    step: int
    time: float
    rank_max: int
    rank_avg: float
    mals_sweeps: int
    mals_residual: float
    mass: float
    momentum: tuple[float, ...]
    energy: float
    density_tv: float
    wall_ms: float
    rel_err_oracle: float | None = None

    def to_payload(self) -> dict[str, Any]:
        payload = asdict(self)
        payload["momentum"] = list(self.momentum)
        return payload

    def to_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "step": self.step,
            "time": self.time,
            "rank_max": self.rank_max,
            "rank_avg": self.rank_avg,
            "mals_sweeps": self.mals_sweeps,
            "mals_residual": self.mals_residual,
            "mass": self.mass,
            "energy": self.energy,
            "density_tv": self.density_tv,
            "wall_ms": self.wall_ms,
            "rel_err_oracle": "" if self.rel_err_oracle is None else self.rel_err_oracle,
        }
        for index, value in enumerate(self.momentum, start=1):
            row[f"momentum_{index}"] = value
        return row

    @classmethod
    def from_row(cls, row: Mapping[str, str], dim: int) -> "StepRecord":
        try:
            oracle = row.get("rel_err_oracle", "")
            return cls(
                step=int(row["step"]),
                time=float(row["time"]),
                rank_max=int(row["rank_max"]),
                rank_avg=float(row["rank_avg"]),
                mals_sweeps=int(row["mals_sweeps"]),
                mals_residual=float(row["mals_residual"]),
                mass=float(row["mass"]),
                momentum=tuple(float(row[f"momentum_{i + 1}"]) for i in range(dim)),
                energy=float(row["energy"]),
                density_tv=float(row["density_tv"]),
                wall_ms=float(row["wall_ms"]),
                rel_err_oracle=float(oracle) if oracle else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FieldIOError(f"malformed diagnostics row {dict(row)!r}: {exc}") from exc


@dataclass(slots=True)
class RunDiagnostics:
    """Ordered per-step records plus a free-form run summary."""

    dim: int
    records: list[StepRecord] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    def append(self, record: StepRecord) -> None:
        if len(record.momentum) != self.dim:
            raise ValueError(f"record has {len(record.momentum)} momentum components, expected {self.dim}")
        if self.records and record.step <= self.records[-1].step:
            raise ValueError(f"step {record.step} does not follow step {self.records[-1].step}")
        self.records.append(record)

    @property
    def has_oracle(self) -> bool:
        return any(record.rel_err_oracle is not None for record in self.records)

    def average_rank(self) -> float:
        """Mean of the per-step average TT ranks over the time levels after the initial one."""

        stepped = [record.rank_avg for record in self.records if record.step > 0] or [
            record.rank_avg for record in self.records
        ]
        return float(sum(stepped) / len(stepped)) if stepped else 0.0

    def max_rank(self) -> int:
        return max((record.rank_max for record in self.records), default=0)

    def tv_growth(self) -> float | None:
        if not self.records or self.records[0].density_tv == 0.0:
            return None
        return max(record.density_tv for record in self.records) / self.records[0].density_tv

    def max_oracle_error(self) -> float | None:
        errors = [record.rel_err_oracle for record in self.records if record.rel_err_oracle is not None]
        return max(errors) if errors else None

    def write_csv(self, path: str | Path) -> None:
        columns = csv_columns(self.dim, self.has_oracle)
        try:
            with Path(path).open("w", newline="", encoding="utf-8") as handle:
                writer = csv.DictWriter(handle, fieldnames=columns, extrasaction="ignore")
                writer.writeheader()
                for record in self.records:
                    validate_record(record.to_payload())
                    writer.writerow(record.to_row())
        except OSError as exc:
            raise FieldIOError(f"cannot write diagnostics to {path}: {exc}") from exc

    @classmethod
    def read_csv(cls, path: str | Path) -> "RunDiagnostics":
        try:
            with Path(path).open(newline="", encoding="utf-8") as handle:
                reader = csv.DictReader(handle)
                header = reader.fieldnames or []
                rows = list(reader)
        except OSError as exc:
            raise FieldIOError(f"cannot read diagnostics from {path}: {exc}") from exc
        dim = sum(1 for name in header if name.startswith("momentum_"))
        if dim == 0 or header != csv_columns(dim, "rel_err_oracle" in header):
            raise FieldIOError(f"{path} does not carry the diagnostics columns: {header}")
        diagnostics = cls(dim)
        for row in rows:
            diagnostics.append(StepRecord.from_row(row, dim))
        return diagnostics


@dataclass(frozen=True, slots=True)
class QuantityDrift:
    name: str
    initial: float
    max_drift: float
    normalized: float | None

    @property
    def absolute(self) -> bool:
        """True when the drift is reported unnormalized (initial value zero)."""

        return self.normalized is None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "initial": self.initial,
            "max_drift": self.max_drift,
            "normalized": self.normalized,
            "absolute": self.absolute,
        }


@dataclass(frozen=True, slots=True)
class ConservationReport:
    quantities: tuple[QuantityDrift, ...]

    def worst(self) -> float:
        return max((q.max_drift for q in self.quantities), default=0.0)

    def by_name(self, name: str) -> QuantityDrift:
        for quantity in self.quantities:
            if quantity.name == name:
                return quantity
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {q.name: q.to_dict() for q in self.quantities}


def _drift(name: str, series: Sequence[float], reference: float) -> QuantityDrift:
    initial = float(series[0])
    drift = max(abs(value - initial) for value in series)
    zero_level = 1e-12 * max(abs(reference), 1.0)
    normalized = drift / abs(initial) if abs(initial) > zero_level else None
    return QuantityDrift(name, initial, drift, normalized)


def conservation_from_series(
    mass: Sequence[float],
    momentum: Sequence[Sequence[float]],
    energy: Sequence[float],
) -> ConservationReport:
    """Max drift from the first entry for mass, each momentum component and energy.

    Momentum components whose initial value is zero are reported as absolute
    drifts.
    """

    if not mass:
        return ConservationReport(())
    scale = abs(mass[0])
    quantities = [_drift("mass", mass, scale)]
    for index, component in enumerate(zip(*momentum), start=1):
        quantities.append(_drift(f"momentum_{index}", component, scale))
    quantities.append(_drift("energy", energy, scale))
    return ConservationReport(tuple(quantities))


def conservation_report(diag: RunDiagnostics) -> ConservationReport:
    return conservation_from_series(
        [r.mass for r in diag.records],
        [r.momentum for r in diag.records],
        [r.energy for r in diag.records],
    )


__all__ = [
    "ConservationReport",
    "QuantityDrift",
    "RunDiagnostics",
    "StepRecord",
    "conservation_from_series",
    "conservation_report",
    "csv_columns",
    "load_schema",
    "validate_record",
]
