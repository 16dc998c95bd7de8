"""Discrete BGK model: grids, upwind operators, moments, equilibrium and collisions.

Modes are ordered ``(x_1..x_D, v_1..v_D)``; every grid is ``hk - pi`` with
``h = 2 pi / m``.  The velocity node ``-pi`` stands for both ends of the
truncated interval, so first moments give it effective velocity 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from math import pi
from typing import Sequence

import numpy as np

from .config import BgkConfig
from .errors import PositivityError
from .tt_core import TtTensor, expand, partial_reduce_spatial, tt_from_dense, tt_hadamard, tt_round, tt_scale
from .tt_operator import (
    TtOperator,
    op_add,
    op_from_kron_terms,
    op_identity,
    op_round,
    op_scale,
    op_zero,
)

_LOGGER = logging.getLogger(__name__)

OPERATOR_ROUNDING = 1e-13


def grid_nodes(m: int) -> np.ndarray:
    return 2.0 * pi / m * np.arange(m) - pi


def velocity_weights(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-axis quadrature weights for the zeroth, first and second moments."""

    nodes = grid_nodes(m)
    first = nodes.copy()
    first[0] = 0.0
    return np.ones(m), first, nodes**2


@dataclass(frozen=True, slots=True)
class UpwindMatrices:
    dplus: np.ndarray
    dminus: np.ndarray
    vplus: np.ndarray
    vminus: np.ndarray


def build_upwind_matrices(m: int, nodes: np.ndarray | None = None) -> UpwindMatrices:
    """Second-order one-sided periodic differences and velocity sign splits."""

    if m < 4:
        raise ValueError(f"m must be >= 4, got {m}")
    nodes = grid_nodes(m) if nodes is None else np.asarray(nodes, dtype=np.float64)
    if nodes.shape != (m,):
        raise ValueError(f"expected {m} nodes, got shape {nodes.shape}")
    h = 2.0 * pi / m
    eye = np.eye(m)
    dplus = (3.0 * eye - 4.0 * np.roll(eye, -1, axis=1) + np.roll(eye, -2, axis=1)) / (2.0 * h)
    return UpwindMatrices(
        dplus=dplus,
        dminus=-dplus.T,
        vplus=np.diag(np.maximum(nodes, 0.0)),
        vminus=np.diag(np.minimum(nodes, 0.0)),
    )


def fourth_difference_matrix(m: int) -> np.ndarray:
    """Circulant stencil ``(1, -4, 6, -4, 1) / h^4``."""

    h = 2.0 * pi / m
    eye = np.eye(m)
    stencil = (
        np.roll(eye, -2, axis=1)
        - 4.0 * np.roll(eye, -1, axis=1)
        + 6.0 * eye
        - 4.0 * np.roll(eye, 1, axis=1)
        + np.roll(eye, 2, axis=1)
    )
    return stencil / h**4


def transport_terms(cfg: BgkConfig) -> list[list[np.ndarray]]:
    """Kronecker terms of the transport operator, two per spatial dimension."""

    up = build_upwind_matrices(cfg.m)
    eye = np.eye(cfg.m)
    terms: list[list[np.ndarray]] = []
    for i in range(cfg.dim):
        for velocity, difference in ((up.vplus, up.dplus), (up.vminus, up.dminus)):
            factors = [eye] * cfg.order
            factors[i] = difference
            factors[cfg.dim + i] = -velocity
            terms.append(factors)
    return terms


def dissipation_terms(cfg: BgkConfig) -> list[list[np.ndarray]]:
    fourth = fourth_difference_matrix(cfg.m)
    eye = np.eye(cfg.m)
    offset = 0 if cfg.dissipation_axes == "space" else cfg.dim
    terms: list[list[np.ndarray]] = []
    for i in range(cfg.dim):
        factors = [eye] * cfg.order
        factors[offset + i] = fourth
        terms.append(factors)
    return terms


def build_transport_operator(cfg: BgkConfig) -> TtOperator:
    return op_round(op_from_kron_terms(transport_terms(cfg)), OPERATOR_ROUNDING)


def build_dissipation_operator(cfg: BgkConfig) -> TtOperator:
    return op_round(op_from_kron_terms(dissipation_terms(cfg)), OPERATOR_ROUNDING)


@dataclass(frozen=True, slots=True)
class StepOperators:
    """Operators of the CNLF system, built once per run."""

    transport: TtOperator
    lhs: TtOperator
    rhs: TtOperator
    collision: bool = True


def build_step_operators(cfg: BgkConfig, *, transport: bool = True, collision: bool = True) -> StepOperators:
    """Assemble ``L``, ``I - dt L`` and ``I + dt L - (eps h^4 / 16) M``.

    ``transport=False`` zeroes ``L`` and ``collision=False`` drops ``Q``; both
    switches exist for degenerate checks.
    """

    identity = op_identity(cfg.mode_sizes)
    lop = build_transport_operator(cfg) if transport else op_zero(cfg.mode_sizes)
    lhs = op_round(op_add(identity, op_scale(lop, -cfg.dt)), OPERATOR_ROUNDING)
    rhs = op_add(identity, op_scale(lop, cfg.dt))
    if cfg.eps_diss > 0.0:
        damping = cfg.eps_diss * cfg.h**4 / 16.0
        rhs = op_add(rhs, op_scale(build_dissipation_operator(cfg), -damping))
    return StepOperators(
        transport=lop,
        lhs=lhs,
        rhs=op_round(rhs, OPERATOR_ROUNDING),
        collision=collision,
    )


def _first_nonpositive(name: str, values: np.ndarray) -> None:
    bad = ~(values > 0.0)
    if np.any(bad):
        node = np.unravel_index(int(np.argmax(bad)), values.shape)
        raise PositivityError(name, node, float(values[node]))


@dataclass(frozen=True, slots=True)
class MacroFields:
    """Density, mean velocity and temperature on the spatial grid."""

    rho: np.ndarray
    u: tuple[np.ndarray, ...]
    temp: np.ndarray

    def __post_init__(self) -> None:
        _first_nonpositive("density", self.rho)
        _first_nonpositive("temperature", self.temp)

    @property
    def dim(self) -> int:
        return len(self.u)


@dataclass(frozen=True, slots=True)
class RawMoments:
    """Unnormalized moments: ``rho``, ``rho U_i`` and ``S_i = h^D sum v_i^2 F``."""

    rho: np.ndarray
    momentum: tuple[np.ndarray, ...]
    second: tuple[np.ndarray, ...]

    def to_macro(self, bo: float) -> MacroFields:
        _first_nonpositive("density", self.rho)
        dim = len(self.momentum)
        u = tuple(p / self.rho for p in self.momentum)
        spread = sum(s - self.rho * ui**2 for s, ui in zip(self.second, u))
        temp = bo / (dim * self.rho) * spread
        return MacroFields(self.rho, u, temp)


def _check_layout(f: TtTensor, cfg: BgkConfig) -> None:
    if f.mode_sizes != cfg.mode_sizes:
        raise ValueError(f"expected modes {cfg.mode_sizes} for dim={cfg.dim}, got {f.mode_sizes}")


def _velocity_vector(cores: Sequence[np.ndarray], weights: Sequence[np.ndarray]) -> np.ndarray:
    chain = np.einsum("anb,n->ab", cores[0], weights[0])
    for core, weight in zip(cores[1:], weights[1:]):
        chain = chain @ np.einsum("anb,n->ab", core, weight)
    return chain[:, 0]


def raw_moments(f: TtTensor, cfg: BgkConfig) -> RawMoments:
    """Moments through the partial spatial reduction, never forming the full tensor."""

    _check_layout(f, cfg)
    dim = cfg.dim
    reduced = partial_reduce_spatial(f).values
    velocity_cores = f.cores[dim:]
    ones, first, second = velocity_weights(cfg.m)
    scale = cfg.h**dim

    def moment(axis: int | None, weight: np.ndarray | None) -> np.ndarray:
        weights = [ones] * dim
        if axis is not None and weight is not None:
            weights[axis] = weight
        return scale * (reduced @ _velocity_vector(velocity_cores, weights))

    return RawMoments(
        rho=moment(None, None),
        momentum=tuple(moment(i, first) for i in range(dim)),
        second=tuple(moment(i, second) for i in range(dim)),
    )


def compute_moments(f: TtTensor, cfg: BgkConfig) -> MacroFields:
    return raw_moments(f, cfg).to_macro(cfg.bo)


def conserved_totals(raw: RawMoments, cfg: BgkConfig) -> tuple[float, tuple[float, ...], float]:
    """Mass, momentum and energy summed over the spatial grid."""

    scale = cfg.h**cfg.dim
    mass = scale * float(raw.rho.sum())
    momentum = tuple(scale * float(p.sum()) for p in raw.momentum)
    energy = scale * 0.5 * float(sum(s.sum() for s in raw.second))
    return mass, momentum, energy


def density_total_variation(rho: np.ndarray) -> float:
    """Periodic total variation of a spatial field."""

    return float(sum(np.abs(np.roll(rho, -1, axis=axis) - rho).sum() for axis in range(rho.ndim)))


def collision_frequency(mf: MacroFields, cfg: BgkConfig) -> np.ndarray:
    return cfg.k_coll * mf.rho * mf.temp ** (1.0 - cfg.mu)


def maxwellian_factors(mf: MacroFields, cfg: BgkConfig) -> list[np.ndarray]:
    """Per-axis equilibrium factors; their product over axes is the Maxwellian.

    Factor ``i`` has modes ``(x_1..x_D, v_i)``.
    """

    v = grid_nodes(cfg.m)
    temp = mf.temp[..., None]
    amplitude = mf.rho ** (1.0 / cfg.dim) / np.sqrt(2.0 * pi * mf.temp / cfg.bo)
    return [
        amplitude[..., None] * np.exp(-cfg.bo * (v - ui[..., None]) ** 2 / (2.0 * temp)) for ui in mf.u
    ]


_Monomial = tuple[tuple[int, int], ...]


def _moment_basis(dim: int) -> tuple[list[list[_Monomial]], list[list[_Monomial]]]:
    """Test functions (with the first-moment boundary rule) and exponent functions."""

    zero: _Monomial = ((0, 0),) * dim

    def on_axis(axis: int, hat: int, power: int) -> _Monomial:
        parts = list(zero)
        parts[axis] = (hat, power)
        return tuple(parts)

    energy = [on_axis(i, 0, 2) for i in range(dim)]
    tests = [[zero]] + [[on_axis(i, 1, 0)] for i in range(dim)] + [energy]
    exponents = [[zero]] + [[on_axis(i, 0, 1)] for i in range(dim)] + [energy]
    return tests, exponents


def _multiply(a: _Monomial, b: _Monomial) -> _Monomial:
    return tuple((ha | hb, pa + pb) for (ha, pa), (hb, pb) in zip(a, b))


def _evaluate(tables: np.ndarray, monomial: _Monomial) -> np.ndarray:
    result = tables[0, monomial[0][0], monomial[0][1]]
    for axis, (hat, power) in enumerate(monomial[1:], start=1):
        result = result * tables[axis, hat, power]
    return result


def _moment_tables(alpha: np.ndarray, cfg: BgkConfig) -> np.ndarray:
    """``h sum_l w(v_l) v_l^p g_i(v_l)`` per axis, weight (plain|first-moment), power."""

    dim = cfg.dim
    v = grid_nodes(cfg.m)
    _, first, _ = velocity_weights(cfg.m)
    powers = v[None, :] ** np.arange(5)[:, None]
    weighted = np.stack([powers, powers * first[None, :]])
    tables = np.empty((dim, 2, 5) + alpha.shape[1:])
    for i, factor in enumerate(_exponential_factors(alpha, cfg)):
        tables[i] = cfg.h * np.einsum("...l,wpl->wp...", factor, weighted)
    return tables


def _exponential_factors(alpha: np.ndarray, cfg: BgkConfig) -> list[np.ndarray]:
    dim = cfg.dim
    v = grid_nodes(cfg.m)
    return [
        np.exp(alpha[0][..., None] / dim + alpha[1 + i][..., None] * v + alpha[dim + 1][..., None] * v**2)
        for i in range(dim)
    ]


def conservative_parameters(
    mf: MacroFields,
    cfg: BgkConfig,
    *,
    tol: float = 1e-12,
    max_iter: int = 25,
) -> np.ndarray:
    """Exponents ``(a, b_1..b_D, c)`` of ``exp(a + b.v + c|v|^2)`` matching the discrete moments.

    Solved per spatial node by Newton's method from the continuous Maxwellian.
    """

    dim, bo = cfg.dim, cfg.bo
    rho, temp = mf.rho, mf.temp
    speed2 = sum(ui**2 for ui in mf.u)
    alpha = np.empty((dim + 2,) + rho.shape)
    alpha[0] = np.log(rho) - 0.5 * dim * np.log(2.0 * pi * temp / bo) - bo * speed2 / (2.0 * temp)
    for i, ui in enumerate(mf.u):
        alpha[1 + i] = bo * ui / temp
    alpha[dim + 1] = -bo / (2.0 * temp)

    target = np.stack([rho] + [rho * ui for ui in mf.u] + [dim * rho * temp / bo + rho * speed2])
    scale = np.stack([rho] * (dim + 1) + [target[-1]])
    tests, exponents = _moment_basis(dim)

    for iteration in range(max_iter):
        tables = _moment_tables(alpha, cfg)
        moments = np.stack([sum(_evaluate(tables, mono) for mono in test) for test in tests])
        residual = moments - target
        worst = float(np.max(np.abs(residual) / scale))
        if worst <= tol:
            _LOGGER.debug("conservative closure converged after %d Newton steps", iteration)
            break
        jacobian = np.empty(rho.shape + (dim + 2, dim + 2))
        for j, test in enumerate(tests):
            for k, exponent in enumerate(exponents):
                jacobian[..., j, k] = sum(_evaluate(tables, _multiply(a, b)) for a in test for b in exponent)
        step = np.linalg.solve(jacobian, np.moveaxis(residual, 0, -1)[..., None])[..., 0]
        alpha = alpha - np.moveaxis(step, -1, 0)
    else:
        _LOGGER.warning("conservative closure stopped at relative moment error %.2e", worst)
    return alpha


def equilibrium_factors(mf: MacroFields, cfg: BgkConfig) -> list[np.ndarray]:
    if cfg.closure == "conservative":
        return _exponential_factors(conservative_parameters(mf, cfg), cfg)
    return maxwellian_factors(mf, cfg)


def factorized_tt(factors: Sequence[np.ndarray], cfg: BgkConfig, eps: float) -> TtTensor:
    """Compress per-axis factors, expand each to all velocity modes and multiply.

    Factor ``i`` carries modes ``(x_1..x_D, v_i)``; identity cores are inserted for
    the other velocity axes, then the factors are combined by Hadamard products
    with rounding after each product.
    """

    dim = cfg.dim
    product: TtTensor | None = None
    for i, factor in enumerate(factors):
        expanded = tt_from_dense(factor, eps)
        for axis in range(dim):
            if axis != i:
                expanded = expand(expanded, dim + axis + 1, cfg.m)
        product = expanded if product is None else tt_hadamard(product, expanded)
        product = tt_round(product, eps)
    if product is None:
        raise ValueError("need at least one factor")
    return product


def build_equilibrium(mf: MacroFields, cfg: BgkConfig, eps_b: float) -> TtTensor:
    return factorized_tt(equilibrium_factors(mf, cfg), cfg, eps_b)


def expand_spatial_field(field: np.ndarray, cfg: BgkConfig, eps: float) -> TtTensor:
    """Compress a D-mode spatial field and make it constant along every velocity mode."""

    compressed = tt_from_dense(field, eps)
    for axis in range(cfg.dim):
        compressed = expand(compressed, cfg.dim + axis + 1, cfg.m)
    return compressed


def build_collision_term(f: TtTensor, cfg: BgkConfig, *, moments: MacroFields | None = None) -> TtTensor:
    """BGK relaxation ``(1/Kn) nu (F_eq - F)`` in TT form."""

    _check_layout(f, cfg)
    mf = moments if moments is not None else compute_moments(f, cfg)
    equilibrium = build_equilibrium(mf, cfg, cfg.eps_b)
    frequency = expand_spatial_field(collision_frequency(mf, cfg), cfg, cfg.eps_b)
    gap = tt_round(equilibrium - f, cfg.eps_b)
    relaxed = tt_round(tt_hadamard(frequency, gap), cfg.eps_b)
    return tt_scale(relaxed, 1.0 / cfg.kn)


__all__ = [
    "MacroFields",
    "OPERATOR_ROUNDING",
    "RawMoments",
    "StepOperators",
    "UpwindMatrices",
    "build_collision_term",
    "build_dissipation_operator",
    "build_equilibrium",
    "build_step_operators",
    "build_transport_operator",
    "build_upwind_matrices",
    "collision_frequency",
    "compute_moments",
    "conservative_parameters",
    "conserved_totals",
    "density_total_variation",
    "dissipation_terms",
    "equilibrium_factors",
    "expand_spatial_field",
    "factorized_tt",
    "fourth_difference_matrix",
    "grid_nodes",
    "maxwellian_factors",
    "raw_moments",
    "transport_terms",
    "velocity_weights",
]
