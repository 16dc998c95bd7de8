"""Linear operators in tensor-train (matrix product operator) form."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tt_core import TtTensor, tt_round


@dataclass(frozen=True, slots=True)
class TtOperator:
    """Cores of shape ``(s_{k-1}, n_out, n_in, s_k)`` with square physical blocks."""

    cores: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        cores = tuple(np.asarray(core, dtype=np.float64) for core in self.cores)
        if not cores:
            raise ValueError("a TT operator needs at least one core")
        for index, core in enumerate(cores):
            if core.ndim != 4:
                raise ValueError(f"operator core {index} must have 4 indices, got {core.shape}")
            if core.shape[1] != core.shape[2]:
                raise ValueError(f"operator core {index} is not square: {core.shape}")
        if cores[0].shape[0] != 1 or cores[-1].shape[3] != 1:
            raise ValueError("operator boundary ranks must be 1")
        for index in range(len(cores) - 1):
            if cores[index].shape[3] != cores[index + 1].shape[0]:
                raise ValueError(
                    f"operator rank mismatch between core {index} {cores[index].shape} "
                    f"and core {index + 1} {cores[index + 1].shape}"
                )
        object.__setattr__(self, "cores", cores)

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def mode_sizes(self) -> tuple[int, ...]:
        return tuple(core.shape[1] for core in self.cores)

    @property
    def op_ranks(self) -> tuple[int, ...]:
        return tuple(core.shape[3] for core in self.cores[:-1])

    @property
    def max_rank(self) -> int:
        return max(self.op_ranks, default=1)


def _check_modes(op: TtOperator, modes: Sequence[int]) -> None:
    if op.mode_sizes != tuple(modes):
        raise ValueError(f"operator modes {op.mode_sizes} do not match {tuple(modes)}")


def op_identity(mode_sizes: Sequence[int]) -> TtOperator:
    return TtOperator(tuple(np.eye(int(n)).reshape(1, int(n), int(n), 1) for n in mode_sizes))


def op_zero(mode_sizes: Sequence[int]) -> TtOperator:
    return TtOperator(tuple(np.zeros((1, int(n), int(n), 1)) for n in mode_sizes))


def op_from_kron_terms(terms: Sequence[Sequence[np.ndarray]]) -> TtOperator:
    """Assemble ``sum_t A_t1 (x) A_t2 (x) ... (x) A_td`` with op ranks at most ``len(terms)``."""

    if not terms:
        raise ValueError("need at least one Kronecker term")
    d = len(terms[0])
    if d == 0:
        raise ValueError("Kronecker terms need at least one factor")
    factors = [[np.asarray(f, dtype=np.float64) for f in term] for term in terms]
    for index, term in enumerate(factors):
        if len(term) != d:
            raise ValueError(f"term {index} has {len(term)} factors, expected {d}")
    for k in range(d):
        n = factors[0][k].shape[0]
        for index, term in enumerate(factors):
            if term[k].shape != (n, n):
                raise ValueError(
                    f"factor {k} of term {index} has shape {term[k].shape}, expected {(n, n)}"
                )

    count = len(factors)
    if d == 1:
        return TtOperator((sum(term[0] for term in factors).reshape(1, *factors[0][0].shape, 1),))

    cores: list[np.ndarray] = []
    for k in range(d):
        n = factors[0][k].shape[0]
        if k == 0:
            core = np.zeros((1, n, n, count))
            for t, term in enumerate(factors):
                core[0, :, :, t] = term[k]
        elif k == d - 1:
            core = np.zeros((count, n, n, 1))
            for t, term in enumerate(factors):
                core[t, :, :, 0] = term[k]
        else:
            core = np.zeros((count, n, n, count))
            for t, term in enumerate(factors):
                core[t, :, :, t] = term[k]
        cores.append(core)
    return TtOperator(tuple(cores))


def op_apply(op: TtOperator, t: TtTensor) -> TtTensor:
    """Matrix-vector product in TT form; output ranks are ``s_k * r_k``."""

    _check_modes(op, t.mode_sizes)
    cores = []
    for oc, tc in zip(op.cores, t.cores):
        s0, n, _, s1 = oc.shape
        r0, _, r1 = tc.shape
        cores.append(np.einsum("aijb,cjd->acibd", oc, tc).reshape(s0 * r0, n, s1 * r1))
    return TtTensor(tuple(cores))


def op_scale(op: TtOperator, c: float) -> TtOperator:
    cores = list(op.cores)
    cores[0] = cores[0] * float(c)
    return TtOperator(tuple(cores))


def op_add(a: TtOperator, b: TtOperator) -> TtOperator:
    _check_modes(a, b.mode_sizes)
    if a.d == 1:
        return TtOperator((a.cores[0] + b.cores[0],))
    cores = []
    last = a.d - 1
    for k, (ca, cb) in enumerate(zip(a.cores, b.cores)):
        if k == 0:
            cores.append(np.concatenate([ca, cb], axis=3))
        elif k == last:
            cores.append(np.concatenate([ca, cb], axis=0))
        else:
            sa0, n, _, sa1 = ca.shape
            sb0, _, _, sb1 = cb.shape
            block = np.zeros((sa0 + sb0, n, n, sa1 + sb1))
            block[:sa0, :, :, :sa1] = ca
            block[sa0:, :, :, sa1:] = cb
            cores.append(block)
    return TtOperator(tuple(cores))


def op_transpose(op: TtOperator) -> TtOperator:
    return TtOperator(tuple(np.ascontiguousarray(core.transpose(0, 2, 1, 3)) for core in op.cores))


def op_compose(a: TtOperator, b: TtOperator) -> TtOperator:
    """Operator product ``a @ b`` (``b`` acts first)."""

    _check_modes(a, b.mode_sizes)
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        sa0, n, _, sa1 = ca.shape
        sb0, _, _, sb1 = cb.shape
        cores.append(np.einsum("aijb,cjkd->acikbd", ca, cb).reshape(sa0 * sb0, n, n, sa1 * sb1))
    return TtOperator(tuple(cores))


def op_round(op: TtOperator, eps: float) -> TtOperator:
    """Round by flattening each core's two physical indices into one mode."""

    flat = TtTensor(tuple(core.reshape(core.shape[0], -1, core.shape[3]) for core in op.cores))
    rounded = tt_round(flat, eps)
    cores = []
    for core, n in zip(rounded.cores, op.mode_sizes):
        cores.append(core.reshape(core.shape[0], n, n, core.shape[2]))
    return TtOperator(tuple(cores))


def op_to_dense(op: TtOperator) -> np.ndarray:
    """Dense matrix in C-order linearization (equals ``kron(A_1, ..., A_d)`` for one term)."""

    first = op.cores[0]
    result = first.reshape(first.shape[1], first.shape[2], first.shape[3])
    for core in op.cores[1:]:
        rows, cols, _ = result.shape
        _, n_out, n_in, s1 = core.shape
        result = np.einsum("IJs,sijt->IiJjt", result, core).reshape(rows * n_out, cols * n_in, s1)
    return result[:, :, 0]


__all__ = [
    "TtOperator",
    "op_add",
    "op_apply",
    "op_compose",
    "op_from_kron_terms",
    "op_identity",
    "op_round",
    "op_scale",
    "op_to_dense",
    "op_transpose",
    "op_zero",
]
