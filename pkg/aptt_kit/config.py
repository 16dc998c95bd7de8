"""Run configuration: grid, physics and tolerance parameters.

Values default to the standard BGK parameter set (K=1, mu=0.5, Kn=1, Bo=3.65,
eps_b=eps_d=1e-6, dt=0.01).  Config files are flat ``key=value`` text with
``#`` comments; resolution order is defaults < scenario overrides < file <
explicit overrides (CLI flags).
"""
from __future__ import annotations

from math import floor, pi
from pathlib import Path
from typing import TYPE_CHECKING, Any, Literal, Mapping

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from .errors import ConfigError

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .scenarios import Scenario


class BgkConfig(BaseModel):
    """Immutable, validated parameter set for one run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dim: int = 2
    m: int = 16
    dt: float = 0.01
    t_star: float = 1.0
    kn: float = 1.0
    bo: float = 3.65
    k_coll: float = 1.0
    mu: float = 0.5
    eps_b: float = 1e-6
    eps_d: float = 1e-6
    eps_diss: float = 0.0
    max_sweeps: int = 20
    closure: Literal["maxwellian", "conservative"] = "maxwellian"
    dissipation_axes: Literal["space", "velocity"] = "space"

    @field_validator("dim")
    @classmethod
    def _check_dim(cls, value: int) -> int:
        if value not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        return value

    @field_validator("m")
    @classmethod
    def _check_m(cls, value: int) -> int:
        if value < 4 or value % 2:
            raise ValueError(f"m must satisfy m >= 4 and be even, got {value}")
        return value

    @field_validator("dt", "t_star", "kn", "bo", "k_coll")
    @classmethod
    def _check_positive(cls, value: float) -> float:
        if not value > 0.0:
            raise ValueError(f"must be > 0, got {value}")
        return value

    @field_validator("eps_b", "eps_d")
    @classmethod
    def _check_tolerance(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError(f"tolerance must lie in (0, 1), got {value}")
        return value

    @field_validator("eps_diss")
    @classmethod
    def _check_dissipation(cls, value: float) -> float:
        if value < 0.0:
            raise ValueError(f"must be >= 0, got {value}")
        return value

    @field_validator("max_sweeps")
    @classmethod
    def _check_sweeps(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {value}")
        return value

    @property
    def h(self) -> float:
        return 2.0 * pi / self.m

    @property
    def order(self) -> int:
        """Number of TT modes: D spatial followed by D velocity."""

        return 2 * self.dim

    @property
    def mode_sizes(self) -> tuple[int, ...]:
        return (self.m,) * self.order

    def schedule(self) -> tuple[int, float]:
        """Number of full steps and the length of a closing partial step (0 if none)."""

        ratio = self.t_star / self.dt
        nearest = round(ratio)
        if nearest >= 1 and abs(ratio - nearest) <= 1e-9 * max(ratio, 1.0):
            return int(nearest), 0.0
        full = int(floor(ratio))
        return full, self.t_star - full * self.dt


def _format_validation_error(exc: ValidationError) -> ConfigError:
    first = exc.errors()[0]
    field = ".".join(str(part) for part in first.get("loc", ())) or None
    message = first.get("msg", str(exc))
    if message.startswith("Value error, "):
        message = message[len("Value error, ") :]
    if first.get("type") == "extra_forbidden":
        message = "unknown configuration key"
    return ConfigError(f"{field}: {message}" if field else message, field=field)


def make_config(**values: Any) -> BgkConfig:
    """Build a config, turning pydantic failures into :class:`ConfigError`."""

    try:
        return BgkConfig(**values)
    except ValidationError as exc:
        raise _format_validation_error(exc) from exc


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat ``key=value`` text; keys are validated against :class:`BgkConfig`."""

    known = set(BgkConfig.model_fields) | {"scenario"}
    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", line=number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", line=number)
        if key not in known:
            raise ConfigError(f"unknown configuration key {key!r}", field=key, line=number)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", field=key, line=number)
        if not value:
            raise ConfigError(f"missing value for {key!r}", field=key, line=number)
        values[key] = value
    return values


def load_config(
    path: str | Path | None = None,
    *,
    scenario: str | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> tuple[BgkConfig, Scenario]:
    """Resolve a config and its scenario from defaults, file and overrides.

    The scenario is taken from ``scenario`` if given, else from the file's
    ``scenario`` key, else ``trig``.
    """

    from .scenarios import get_scenario

    file_values: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text("utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        file_values = parse_config_text(text)

    name = scenario or file_values.pop("scenario", None) or "trig"
    file_values.pop("scenario", None)
    chosen = get_scenario(name)

    merged: dict[str, Any] = dict(chosen.overrides)
    merged.update(file_values)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    unknown = sorted(set(merged) - set(BgkConfig.model_fields))
    if unknown:
        raise ConfigError(f"unknown configuration key {unknown[0]!r}", field=unknown[0])
    return make_config(**merged), chosen


def dump_config(cfg: BgkConfig, scenario: str | None = None) -> str:
    """Serialize every field as ``key=value`` lines; reloading yields an equal config."""

    lines = ["# resolved aptt configuration"]
    if scenario is not None:
        lines.append(f"scenario={scenario}")
    for key, value in cfg.model_dump().items():
        lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    return "\n".join(lines) + "\n"


__all__ = ["BgkConfig", "dump_config", "load_config", "make_config", "parse_config_text"]
