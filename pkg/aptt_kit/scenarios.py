"""Initial-value scenarios and their default config overrides."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import pi
from typing import Any, Callable, Mapping

import numpy as np

from .bgk_model import MacroFields, factorized_tt, grid_nodes, maxwellian_factors
from .config import BgkConfig
from .dense_oracle import check_dense_size
from .errors import ConfigError
from .tt_core import DenseTensor, TtTensor

FactorBuilder = Callable[[BgkConfig], list[np.ndarray]]


@dataclass(frozen=True, slots=True)
class Scenario:
    """Named initial state built from per-velocity-axis factors."""

    name: str
    description: str
    factor_builder: FactorBuilder
    overrides: Mapping[str, Any] = field(default_factory=dict)

    def initial_factors(self, cfg: BgkConfig) -> list[np.ndarray]:
        factors = self.factor_builder(cfg)
        for index, factor in enumerate(factors):
            if np.any(factor < 0.0):
                raise ValueError(f"scenario {self.name!r} factor {index} has negative entries")
        return factors

    def initial_tt(self, cfg: BgkConfig) -> TtTensor:
        """Initial field compressed factor by factor at ``eps_b``."""

        return factorized_tt(self.initial_factors(cfg), cfg, cfg.eps_b)

    def initial_dense(self, cfg: BgkConfig) -> DenseTensor:
        check_dense_size(cfg)
        return DenseTensor(dense_product(self.initial_factors(cfg), cfg))


def dense_product(factors: list[np.ndarray], cfg: BgkConfig) -> np.ndarray:
    """Full tensor ``prod_i factor_i(x, v_i)`` with modes ``(x_1..x_D, v_1..v_D)``."""

    dim = cfg.dim
    result = np.ones((cfg.m,) * cfg.order)
    for i, factor in enumerate(factors):
        shape = (cfg.m,) * dim + (1,) * i + (cfg.m,) + (1,) * (dim - i - 1)
        result = result * factor.reshape(shape)
    return result


def spatial_mesh(cfg: BgkConfig) -> list[np.ndarray]:
    nodes = grid_nodes(cfg.m)
    return np.meshgrid(*([nodes] * cfg.dim), indexing="ij")


def _trig(cfg: BgkConfig) -> list[np.ndarray]:
    x = spatial_mesh(cfg)
    rho = 1.0 + 0.5 * np.prod([np.sin(xi) for xi in x], axis=0)
    zero = np.zeros_like(rho)
    return maxwellian_factors(MacroFields(rho, tuple(zero for _ in x), np.ones_like(rho)), cfg)


def _uniform(cfg: BgkConfig) -> list[np.ndarray]:
    shape = (cfg.m,) * cfg.dim
    zero = np.zeros(shape)
    return maxwellian_factors(MacroFields(np.ones(shape), (zero,) * cfg.dim, np.ones(shape)), cfg)


def _discontinuous(cfg: BgkConfig) -> list[np.ndarray]:
    x = spatial_mesh(cfg)
    inside = np.max(np.abs(np.stack(x)), axis=0) <= pi / 8.0
    rho = np.where(inside, 10.0, 1.0)
    zero = np.zeros_like(rho)
    return maxwellian_factors(MacroFields(rho, tuple(zero for _ in x), np.ones_like(rho)), cfg)


def _relaxation(cfg: BgkConfig) -> list[np.ndarray]:
    """Non-Maxwellian product of quartic-exponent factors."""

    x = spatial_mesh(cfg)
    v = grid_nodes(cfg.m)
    dim = cfg.dim
    rho = np.prod([1.0 + 0.5 * np.cos(xi) for xi in x], axis=0)
    temp = 1.0 + 0.0025 * np.cos(x[0])
    shift = x[1] if dim > 1 else x[0]
    u = [1.0 + 0.025 * np.sin(shift - 1.0)]
    if dim > 1:
        u.append(np.zeros_like(rho))
    if dim > 2:
        u.append(0.025 * np.sin(x[0] - 2.0))
    amplitude = rho ** (1.0 / dim) / np.sqrt(2.0 * pi * temp / cfg.bo)
    return [
        amplitude[..., None] * np.exp(-cfg.bo * (ui[..., None] - v) ** 4 / (2.0 * temp[..., None]))
        for ui in u
    ]


SCENARIOS: dict[str, Scenario] = {
    "trig": Scenario(
        "trig",
        "Maxwellian with rho = 1 + 0.5 prod sin(x_i), U = 0, T = 1",
        _trig,
    ),
    "relaxation": Scenario(
        "relaxation",
        "non-Maxwellian quartic factors relaxing towards equilibrium",
        _relaxation,
        {"dim": 3, "kn": 10.0, "dt": 0.005},
    ),
    "discontinuous": Scenario(
        "discontinuous",
        "Maxwellian with rho = 10 inside max|x_i| <= pi/8 and 1 outside",
        _discontinuous,
        {"dim": 3, "kn": 10.0, "eps_b": 1e-5, "eps_d": 1e-5, "dt": 0.002, "eps_diss": 0.1},
    ),
    "uniform": Scenario(
        "uniform",
        "stationary Maxwellian with rho = 1, U = 0, T = 1",
        _uniform,
    ),
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name.strip().lower()]
    except KeyError as exc:
        choices = ", ".join(sorted(SCENARIOS))
        raise ConfigError(f"unknown scenario {name!r} (choose from {choices})", field="scenario") from exc


__all__ = ["SCENARIOS", "Scenario", "dense_product", "get_scenario", "spatial_mesh"]
