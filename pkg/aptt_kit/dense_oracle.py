"""Brute-force dense implementation of the same discretization.

Used as the reference for every TT-versus-dense comparison.  Stencils and grids
come from :mod:`aptt_kit.bgk_model`; everything else is plain array arithmetic
on the full phase-space grid with sparse Kronecker operators and GMRES.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from math import pi
from typing import TYPE_CHECKING, Iterator

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import gmres

from .bgk_model import (
    MacroFields,
    collision_frequency,
    conservative_parameters,
    dissipation_terms,
    grid_nodes,
    transport_terms,
    velocity_weights,
)
from .config import BgkConfig
from .errors import ConfigError, OracleStagnationError, PositivityError
from .tt_core import DenseTensor

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .scenarios import Scenario

_LOGGER = logging.getLogger(__name__)

DENSE_ENTRY_LIMIT = 10**7


def check_dense_size(cfg: BgkConfig) -> None:
    entries = cfg.m**cfg.order
    if entries > DENSE_ENTRY_LIMIT:
        raise ConfigError(
            f"dense oracle limited to {DENSE_ENTRY_LIMIT} entries, m={cfg.m} D={cfg.dim} needs {entries}",
            field="m",
        )


def dense_initial_field(scenario: Scenario, cfg: BgkConfig) -> DenseTensor:
    """Full initial tensor of a scenario, guarded by the dense size limit."""

    return scenario.initial_dense(cfg)


@dataclass(frozen=True, slots=True)
class DenseState:
    f: DenseTensor
    step: int
    time: float
    dim: int
    m: int

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.f.values)):
            raise ValueError(f"non-finite entries in dense state at step {self.step}")


def _velocity_axes(cfg: BgkConfig) -> tuple[int, ...]:
    return tuple(range(cfg.dim, cfg.order))


def _on_velocity_axis(vector: np.ndarray, axis: int, cfg: BgkConfig) -> np.ndarray:
    shape = [1] * cfg.order
    shape[cfg.dim + axis] = cfg.m
    return vector.reshape(shape)


def dense_moments(f: DenseTensor, cfg: BgkConfig) -> MacroFields:
    """Density, velocity and temperature by direct summation over all velocity nodes."""

    check_dense_size(cfg)
    values = f.values
    axes = _velocity_axes(cfg)
    weight = cfg.h**cfg.dim
    _, first, _ = velocity_weights(cfg.m)
    nodes = grid_nodes(cfg.m)

    rho = weight * values.sum(axis=axes)
    if not np.all(rho > 0.0):
        node = np.unravel_index(int(np.argmax(~(rho > 0.0))), rho.shape)
        raise PositivityError("density", node, float(rho[node]))
    u = tuple(
        weight * (values * _on_velocity_axis(first, i, cfg)).sum(axis=axes) / rho for i in range(cfg.dim)
    )

    spread = np.zeros_like(values)
    for i, ui in enumerate(u):
        expand_u = ui.reshape(ui.shape + (1,) * cfg.dim)
        deviation = (_on_velocity_axis(nodes, i, cfg) - expand_u) ** 2
        boundary = [slice(None)] * cfg.order
        boundary[cfg.dim + i] = slice(0, 1)
        deviation = np.broadcast_to(deviation, values.shape).copy()
        deviation[tuple(boundary)] = np.broadcast_to(pi**2 + expand_u**2, deviation[tuple(boundary)].shape)
        spread += deviation
    temp = cfg.bo * weight / (cfg.dim * rho) * (spread * values).sum(axis=axes)
    return MacroFields(rho, u, temp)


def dense_conserved_totals(f: DenseTensor, cfg: BgkConfig) -> tuple[float, tuple[float, ...], float]:
    values = f.values
    weight = cfg.h**cfg.order
    _, first, second = velocity_weights(cfg.m)
    mass = weight * float(values.sum())
    momentum = tuple(weight * float((values * _on_velocity_axis(first, i, cfg)).sum()) for i in range(cfg.dim))
    speed2 = sum(_on_velocity_axis(second, i, cfg) for i in range(cfg.dim))
    energy = 0.5 * weight * float((values * speed2).sum())
    return mass, momentum, energy


def dense_equilibrium(mf: MacroFields, cfg: BgkConfig) -> np.ndarray:
    """Equilibrium evaluated on the full grid from its closed form."""

    dim = cfg.dim
    spatial = (cfg.m,) * dim + (1,) * dim
    velocities = [_on_velocity_axis(grid_nodes(cfg.m), i, cfg) for i in range(dim)]
    if cfg.closure == "conservative":
        alpha = conservative_parameters(mf, cfg)
        exponent = alpha[0].reshape(spatial) + alpha[dim + 1].reshape(spatial) * sum(v**2 for v in velocities)
        for i, v in enumerate(velocities):
            exponent = exponent + alpha[1 + i].reshape(spatial) * v
        return np.exp(exponent)
    rho = mf.rho.reshape(spatial)
    temp = mf.temp.reshape(spatial)
    distance = sum((v - ui.reshape(spatial)) ** 2 for v, ui in zip(velocities, mf.u))
    return rho / (2.0 * pi * temp / cfg.bo) ** (dim / 2.0) * np.exp(-cfg.bo * distance / (2.0 * temp))


def dense_collision(f: DenseTensor, cfg: BgkConfig) -> DenseTensor:
    mf = dense_moments(f, cfg)
    nu = collision_frequency(mf, cfg).reshape((cfg.m,) * cfg.dim + (1,) * cfg.dim)
    return DenseTensor(nu / cfg.kn * (dense_equilibrium(mf, cfg) - f.values))


def assemble_sparse(terms: list[list[np.ndarray]]) -> sp.csr_matrix:
    """Sum of Kronecker products in C-order linearization."""

    total: sp.csr_matrix | None = None
    for factors in terms:
        product = sp.csr_matrix(factors[0])
        for factor in factors[1:]:
            product = sp.kron(product, sp.csr_matrix(factor), format="csr")
        total = product if total is None else total + product
    if total is None:
        raise ValueError("need at least one Kronecker term")
    return total.tocsr()


@dataclass(frozen=True, slots=True)
class DenseOperators:
    transport: sp.csr_matrix
    lhs: sp.csr_matrix
    rhs: sp.csr_matrix
    collision: bool = True


def build_dense_operators(cfg: BgkConfig, *, transport: bool = True, collision: bool = True) -> DenseOperators:
    check_dense_size(cfg)
    size = cfg.m**cfg.order
    identity = sp.identity(size, format="csr")
    lop = assemble_sparse(transport_terms(cfg)) if transport else sp.csr_matrix((size, size))
    rhs = identity + cfg.dt * lop
    if cfg.eps_diss > 0.0:
        rhs = rhs - cfg.eps_diss * cfg.h**4 / 16.0 * assemble_sparse(dissipation_terms(cfg))
    return DenseOperators(
        transport=lop,
        lhs=(identity - cfg.dt * lop).tocsr(),
        rhs=rhs.tocsr(),
        collision=collision,
    )


def _collision_flat(f: np.ndarray, cfg: BgkConfig, ops: DenseOperators) -> np.ndarray:
    if not ops.collision:
        return np.zeros(f.size)
    return dense_collision(DenseTensor(f.reshape(cfg.mode_sizes)), cfg).flat()


def dense_bootstrap_step(f: np.ndarray, cfg: BgkConfig, ops: DenseOperators, *, dt: float | None = None) -> np.ndarray:
    """Two-stage TVD Runge-Kutta step on the flattened field."""

    step = cfg.dt if dt is None else dt
    flat = f.reshape(-1)
    stage = flat + step * (ops.transport @ flat + _collision_flat(flat, cfg, ops))
    return 0.5 * flat + 0.5 * stage + 0.5 * step * (ops.transport @ stage + _collision_flat(stage, cfg, ops))


def dense_cnlf_step(
    f_prev: np.ndarray,
    f_curr: np.ndarray,
    cfg: BgkConfig,
    ops: DenseOperators,
    *,
    rtol: float = 1e-12,
) -> np.ndarray:
    prev, curr = f_prev.reshape(-1), f_curr.reshape(-1)
    q = _collision_flat(curr, cfg, ops)
    rhs = ops.rhs @ prev + 2.0 * cfg.dt * q
    guess = 2.0 * cfg.dt * (ops.transport @ curr + q) + prev
    solution, info = gmres(ops.lhs, rhs, x0=guess, rtol=rtol, atol=0.0, restart=60, maxiter=500)
    if info != 0:
        residual = float(np.linalg.norm(ops.lhs @ solution - rhs) / max(np.linalg.norm(rhs), 1e-300))
        raise OracleStagnationError(f"dense GMRES stopped with info={info}, relative residual {residual:.2e}")
    return solution


def dense_cnlf_run(
    f0: DenseTensor,
    cfg: BgkConfig,
    *,
    transport: bool = True,
    collision: bool = True,
    rtol: float = 1e-12,
) -> Iterator[DenseState]:
    """Yield the reference trajectory, starting with ``f0`` at step 0."""

    check_dense_size(cfg)
    if f0.mode_sizes != cfg.mode_sizes:
        raise ValueError(f"expected modes {cfg.mode_sizes}, got {f0.mode_sizes}")
    ops = build_dense_operators(cfg, transport=transport, collision=collision)
    full, remainder = cfg.schedule()

    def state(values: np.ndarray, step: int, time: float) -> DenseState:
        return DenseState(DenseTensor(values.reshape(cfg.mode_sizes)), step, time, cfg.dim, cfg.m)

    prev = f0.flat().copy()
    yield state(prev, 0, 0.0)
    curr = prev
    if full >= 1:
        curr = dense_bootstrap_step(prev, cfg, ops)
        yield state(curr, 1, cfg.dt)
    for n in range(1, full):
        prev, curr = curr, dense_cnlf_step(prev, curr, cfg, ops, rtol=rtol)
        _LOGGER.debug("dense step %d: max |f| %.6g", n + 1, float(np.abs(curr).max()))
        yield state(curr, n + 1, (n + 1) * cfg.dt)
    if remainder > 0.0:
        _LOGGER.warning("dense run closes with a shortened step of %.3g", remainder)
        curr = dense_bootstrap_step(curr, cfg, ops, dt=remainder)
        yield state(curr, full + 1, cfg.t_star)


__all__ = [
    "DENSE_ENTRY_LIMIT",
    "DenseOperators",
    "DenseState",
    "assemble_sparse",
    "build_dense_operators",
    "check_dense_size",
    "dense_bootstrap_step",
    "dense_cnlf_run",
    "dense_cnlf_step",
    "dense_collision",
    "dense_conserved_totals",
    "dense_equilibrium",
    "dense_initial_field",
    "dense_moments",
]
