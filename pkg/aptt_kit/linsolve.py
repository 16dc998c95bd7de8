"""Two-site MALS (DMRG-style) solver for TT-structured linear systems.

The solver minimizes ``||A x - r||_F`` over TT tensors.  Every two-site update
solves the restriction of the normal equations ``A^T A x = A^T r`` to the
current orthonormal frames, so each local step decreases the global residual.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import sqrt
from typing import Any

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, cg

from .errors import SingularLocalSystemError
from .tt_core import TtTensor, right_orthogonalize, truncation_rank, tt_add, tt_norm, tt_round, tt_scale, tt_zeros
from .tt_operator import TtOperator, op_apply, op_compose, op_round, op_to_dense, op_transpose

_LOGGER = logging.getLogger(__name__)
_NORMAL_EQUATION_ROUNDING = 1e-14


@dataclass(frozen=True, slots=True)
class MalsSettings:
    """Stopping and truncation parameters for :func:`mals_solve`.

    ``local_trunc`` is the relative SVD tolerance used to split an optimized
    two-site block; ``None`` uses an absolute tail bound derived from ``eps_d``.
    ``kick_rank`` extra singular directions beyond the truncation rank are kept
    at every split so ranks can grow toward the solution's.
    """

    eps_d: float
    max_sweeps: int = 20
    local_trunc: float | None = None
    max_local_rank: int | None = None
    direct_limit: int = 4096
    kick_rank: int = 2

    def __post_init__(self) -> None:
        if not self.eps_d > 0.0:
            raise ValueError(f"eps_d must be positive, got {self.eps_d}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.local_trunc is not None and not 0.0 < self.local_trunc < 1.0:
            raise ValueError(f"local_trunc must lie in (0, 1), got {self.local_trunc}")
        if self.max_local_rank is not None and self.max_local_rank < 1:
            raise ValueError(f"max_local_rank must be >= 1, got {self.max_local_rank}")
        if self.kick_rank < 0:
            raise ValueError(f"kick_rank must be >= 0, got {self.kick_rank}")


@dataclass(slots=True)
class MalsReport:
    sweeps_used: int
    final_residual: float
    converged: bool
    rank_history: list[int] = field(default_factory=list)
    residual_history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sweeps_used": self.sweeps_used,
            "final_residual": self.final_residual,
            "converged": self.converged,
            "rank_history": list(self.rank_history),
            "residual_history": list(self.residual_history),
        }


def residual_norm(a: TtOperator, x: TtTensor, r: TtTensor) -> float:
    """``||A x - r||_F`` evaluated entirely in TT form."""

    if a.mode_sizes != x.mode_sizes or x.mode_sizes != r.mode_sizes:
        raise ValueError(
            f"inconsistent modes: operator {a.mode_sizes}, x {x.mode_sizes}, r {r.mode_sizes}"
        )
    return tt_norm(tt_add(op_apply(a, x), tt_scale(r, -1.0)))


def _phi_left(phi: np.ndarray, x: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.einsum("asb,aiA,sijt,bjB->AtB", phi, x, a, x, optimize=True)


def _phi_right(phi: np.ndarray, x: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.einsum("aiA,sijt,bjB,AtB->asb", x, a, x, phi, optimize=True)


def _psi_left(psi: np.ndarray, x: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return np.einsum("ac,aiA,ciC->AC", psi, x, rhs, optimize=True)


def _psi_right(psi: np.ndarray, x: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return np.einsum("aiA,ciC,AC->ac", x, rhs, psi, optimize=True)


class _MalsSweeper:
    """Working state of one solve: orthonormal frames plus the current cores."""

    def __init__(
        self,
        gram: TtOperator,
        projected: TtTensor,
        x0: TtTensor,
        settings: MalsSettings,
        tail_tolerance: float,
        logger: logging.Logger,
    ) -> None:
        self._gram = gram.cores
        self._rhs = projected.cores
        self._settings = settings
        self._tail_tolerance = tail_tolerance
        self._logger = logger
        self.cores = right_orthogonalize(x0)
        d = len(self.cores)
        self._phi: list[np.ndarray] = [np.ones((1, 1, 1)) for _ in range(d + 1)]
        self._psi: list[np.ndarray] = [np.ones((1, 1)) for _ in range(d + 1)]
        for k in range(d - 1, 0, -1):
            self._phi[k] = _phi_right(self._phi[k + 1], self.cores[k], self._gram[k])
            self._psi[k] = _psi_right(self._psi[k + 1], self.cores[k], self._rhs[k])

    def tensor(self) -> TtTensor:
        return TtTensor(tuple(self.cores))

    def sweep(self) -> None:
        d = len(self.cores)
        for k in range(d - 1):
            left, right = self._split(k, self._solve_pair(k), forward=True)
            self.cores[k], self.cores[k + 1] = left, right
            self._phi[k + 1] = _phi_left(self._phi[k], left, self._gram[k])
            self._psi[k + 1] = _psi_left(self._psi[k], left, self._rhs[k])
        for k in range(d - 2, -1, -1):
            left, right = self._split(k, self._solve_pair(k), forward=False)
            self.cores[k], self.cores[k + 1] = left, right
            self._phi[k + 1] = _phi_right(self._phi[k + 2], right, self._gram[k + 1])
            self._psi[k + 1] = _psi_right(self._psi[k + 2], right, self._rhs[k + 1])

    def _solve_pair(self, k: int) -> np.ndarray:
        phi_l, phi_r = self._phi[k], self._phi[k + 2]
        a1, a2 = self._gram[k], self._gram[k + 1]
        rhs = np.einsum(
            "ac,ciC,CjE,AE->aijA", self._psi[k], self._rhs[k], self._rhs[k + 1], self._psi[k + 2], optimize=True
        )
        shape = rhs.shape
        size = rhs.size
        current = np.einsum("aib,bjc->aijc", self.cores[k], self.cores[k + 1])

        if size <= self._settings.direct_limit:
            local = np.einsum("asb,sipt,tjqu,AuB->aijAbpqB", phi_l, a1, a2, phi_r, optimize=True)
            try:
                solution = scipy.linalg.solve(local.reshape(size, size), rhs.reshape(size), assume_a="sym")
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise SingularLocalSystemError(k, str(exc)) from exc
            if not np.all(np.isfinite(solution)):
                raise SingularLocalSystemError(k, "non-finite local solution")
            return solution.reshape(shape)

        def matvec(vector: np.ndarray) -> np.ndarray:
            block = vector.reshape(shape)
            tmp = np.einsum("asb,bpqB->aspqB", phi_l, block, optimize=True)
            tmp = np.einsum("aspqB,sipt->aitqB", tmp, a1, optimize=True)
            tmp = np.einsum("aitqB,tjqu->aijuB", tmp, a2, optimize=True)
            return np.einsum("aijuB,AuB->aijA", tmp, phi_r, optimize=True).reshape(size)

        operator = LinearOperator((size, size), matvec=matvec, dtype=np.float64)
        solution, info = cg(
            operator,
            rhs.reshape(size),
            x0=current.reshape(size),
            rtol=0.0,
            atol=0.1 * self._settings.eps_d,
            maxiter=10 * size,
        )
        if info < 0:
            raise SingularLocalSystemError(k, f"conjugate gradients breakdown (info={info})")
        if info > 0:
            self._logger.debug("local CG at bond %d stopped after %d iterations", k, info)
        return solution.reshape(shape)

    def _split(self, k: int, block: np.ndarray, *, forward: bool) -> tuple[np.ndarray, np.ndarray]:
        r0, n1, n2, r2 = block.shape
        u, s, vt = np.linalg.svd(block.reshape(r0 * n1, n2 * r2), full_matrices=False)
        settings = self._settings
        if settings.local_trunc is None:
            limit = self._tail_tolerance
        else:
            limit = settings.local_trunc * float(np.linalg.norm(s))
        # the tail directions seed rank growth; the caller rounds at eps_b
        rank = min(truncation_rank(s, limit) + settings.kick_rank, s.size)
        if settings.max_local_rank is not None:
            rank = min(rank, self._settings.max_local_rank)
        if forward:
            left = u[:, :rank]
            right = s[:rank, None] * vt[:rank]
        else:
            left = u[:, :rank] * s[:rank]
            right = vt[:rank]
        return left.reshape(r0, n1, rank), right.reshape(rank, n2, r2)


def _tail_tolerance(eps_d: float, d: int) -> float:
    """Absolute Frobenius mass a split may drop, summed over ``d - 1`` bonds."""

    return 0.25 * eps_d / sqrt(max(d - 1, 1))


def _solve_single_mode(a: TtOperator, r: TtTensor, settings: MalsSettings) -> tuple[TtTensor, MalsReport]:
    matrix = op_to_dense(a)
    try:
        solution = scipy.linalg.solve(matrix, r.full().reshape(-1))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularLocalSystemError(0, str(exc)) from exc
    x = TtTensor((solution.reshape(1, -1, 1),))
    residual = residual_norm(a, x, r)
    return x, MalsReport(1, residual, residual <= settings.eps_d, [1], [residual])


def mals_solve(
    a: TtOperator,
    r: TtTensor,
    x0: TtTensor,
    settings: MalsSettings,
    *,
    logger: logging.Logger | None = None,
) -> tuple[TtTensor, MalsReport]:
    """Solve ``A x = r`` by alternating two-site sweeps starting from ``x0``.

    A full sweep runs left to right and back; the residual is checked once per
    full sweep.  Non-convergence is reported, not raised: the returned tensor is
    the best iterate seen and ``report.converged`` is false.
    """

    log = logger or _LOGGER
    if a.mode_sizes != r.mode_sizes or x0.mode_sizes != r.mode_sizes:
        raise ValueError(
            f"inconsistent modes: operator {a.mode_sizes}, r {r.mode_sizes}, x0 {x0.mode_sizes}"
        )

    r_norm = tt_norm(r)
    if r_norm == 0.0:
        return tt_zeros(r.mode_sizes), MalsReport(0, 0.0, True, [1], [0.0])

    initial = residual_norm(a, x0, r)
    if initial <= settings.eps_d:
        return x0, MalsReport(0, initial, True, [x0.max_rank], [initial])
    if r.d == 1:
        return _solve_single_mode(a, r, settings)

    transposed = op_transpose(a)
    gram = op_round(op_compose(transposed, a), _NORMAL_EQUATION_ROUNDING)
    projected = tt_round(op_apply(transposed, r), _NORMAL_EQUATION_ROUNDING)
    sweeper = _MalsSweeper(gram, projected, x0, settings, _tail_tolerance(settings.eps_d, r.d), log)
    best_x, best_residual = x0, initial
    report = MalsReport(0, initial, False)
    for sweep in range(1, settings.max_sweeps + 1):
        sweeper.sweep()
        current = sweeper.tensor()
        residual = residual_norm(a, current, r)
        report.sweeps_used = sweep
        report.rank_history.append(current.max_rank)
        report.residual_history.append(residual)
        log.debug("MALS sweep %d: residual %.3e, max rank %d", sweep, residual, current.max_rank)
        if residual > best_residual:
            log.debug("MALS residual increased from %.3e to %.3e", best_residual, residual)
        else:
            best_x, best_residual = current, residual
        if residual <= settings.eps_d:
            break

    report.final_residual = best_residual
    report.converged = best_residual <= settings.eps_d
    if not report.converged:
        log.warning(
            "MALS stopped after %d sweeps with residual %.3e > eps_d %.1e",
            report.sweeps_used,
            best_residual,
            settings.eps_d,
        )
    return best_x, report


__all__ = ["MalsReport", "MalsSettings", "mals_solve", "residual_norm"]
