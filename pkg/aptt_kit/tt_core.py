"""Tensor-train tensors and the algebra the solver is built on.

A d-mode tensor is stored as ``d`` cores of shape ``(r_{k-1}, n_k, r_k)`` with
``r_0 = r_d = 1``.  Dense tensors use C order throughout (mode 1 slowest), the
same linearization used by the dense oracle and the field dumps.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import prod, sqrt
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True, slots=True)
class DenseTensor:
    """A full tensor in C order (mode 1 slowest)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        array = np.asarray(self.values, dtype=np.float64)
        if array.ndim == 0 or array.size == 0:
            raise ValueError("DenseTensor needs at least one mode and one entry")
        object.__setattr__(self, "values", array)

    @classmethod
    def from_flat(cls, flat: np.ndarray, mode_sizes: Sequence[int]) -> "DenseTensor":
        flat = np.asarray(flat, dtype=np.float64).ravel()
        expected = prod(int(n) for n in mode_sizes)
        if flat.size != expected:
            raise ValueError(
                f"value array has {flat.size} entries, mode sizes {tuple(mode_sizes)} need {expected}"
            )
        return cls(flat.reshape(tuple(int(n) for n in mode_sizes)))

    @property
    def mode_sizes(self) -> tuple[int, ...]:
        return tuple(self.values.shape)

    @property
    def order(self) -> int:
        return self.values.ndim

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True, slots=True)
class TtTensor:
    """Tensor-train representation; treat the cores as read-only."""

    cores: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        cores = tuple(np.asarray(core, dtype=np.float64) for core in self.cores)
        if not cores:
            raise ValueError("a TT tensor needs at least one core")
        for index, core in enumerate(cores):
            if core.ndim != 3:
                raise ValueError(f"core {index} must have 3 indices, got shape {core.shape}")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError(
                f"boundary ranks must be 1, got r_0={cores[0].shape[0]} r_d={cores[-1].shape[2]}"
            )
        for index in range(len(cores) - 1):
            if cores[index].shape[2] != cores[index + 1].shape[0]:
                raise ValueError(
                    f"rank mismatch between core {index} {cores[index].shape} "
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
    def ranks(self) -> tuple[int, ...]:
        """Interior ranks ``(r_1, ..., r_{d-1})``."""

        return tuple(core.shape[2] for core in self.cores[:-1])

    @property
    def full_ranks(self) -> tuple[int, ...]:
        """All ranks ``(r_0, ..., r_d)`` including the unit boundary ranks."""

        return (1,) + tuple(core.shape[2] for core in self.cores)

    @property
    def max_rank(self) -> int:
        return max(self.ranks, default=1)

    @property
    def mean_rank(self) -> float:
        return float(np.mean(self.ranks)) if self.ranks else 1.0

    @property
    def size(self) -> int:
        """Number of stored parameters."""

        return sum(core.size for core in self.cores)

    def full(self) -> np.ndarray:
        """Materialize the tensor as a C-ordered ndarray."""

        result = self.cores[0].reshape(self.cores[0].shape[1], -1)
        for core in self.cores[1:]:
            result = result @ core.reshape(core.shape[0], -1)
            result = result.reshape(-1, core.shape[2])
        return result.reshape(self.mode_sizes)

    def to_dense(self) -> DenseTensor:
        return DenseTensor(self.full())

    def __add__(self, other: "TtTensor") -> "TtTensor":
        return tt_add(self, other)

    def __sub__(self, other: "TtTensor") -> "TtTensor":
        return tt_add(self, tt_scale(other, -1.0))

    def __neg__(self) -> "TtTensor":
        return tt_scale(self, -1.0)

    def __mul__(self, scalar: float) -> "TtTensor":
        return tt_scale(self, scalar)

    __rmul__ = __mul__


def _as_array(a: DenseTensor | np.ndarray) -> np.ndarray:
    if isinstance(a, DenseTensor):
        return a.values
    return np.asarray(a, dtype=np.float64)


def _check_eps(eps: float) -> None:
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"relative tolerance must lie in (0, 1], got {eps}")


def _check_modes(a: TtTensor, b: TtTensor) -> None:
    if a.mode_sizes != b.mode_sizes:
        raise ValueError(f"mode sizes differ: {a.mode_sizes} vs {b.mode_sizes}")


def truncation_rank(singular_values: np.ndarray, threshold: float) -> int:
    """Smallest rank whose discarded tail has Frobenius norm below ``threshold``.

    A singular value sitting exactly on the threshold is kept.
    """

    count = singular_values.size
    if count == 0:
        return 1
    if threshold <= 0.0:
        return count
    tails = np.cumsum(singular_values[::-1] ** 2)
    below = np.nonzero(tails < threshold**2)[0]
    if below.size == 0:
        return count
    return max(count - int(below[-1]) - 1, 1)


def tt_zeros(mode_sizes: Sequence[int]) -> TtTensor:
    return TtTensor(tuple(np.zeros((1, int(n), 1)) for n in mode_sizes))


def tt_ones(mode_sizes: Sequence[int]) -> TtTensor:
    return TtTensor(tuple(np.ones((1, int(n), 1)) for n in mode_sizes))


def tt_rank_one(vectors: Iterable[np.ndarray]) -> TtTensor:
    """Outer product of the given vectors as a rank-1 TT."""

    return TtTensor(tuple(np.asarray(v, dtype=np.float64).reshape(1, -1, 1) for v in vectors))


def tt_from_dense(a: DenseTensor | np.ndarray, eps: float) -> TtTensor:
    """Compress a full tensor by sequential truncated SVD (TT-SVD).

    Each of the ``d - 1`` unfoldings is truncated with absolute budget
    ``eps * ||a||_F / sqrt(d - 1)`` so the total error stays below
    ``eps * ||a||_F``.
    """

    _check_eps(eps)
    array = _as_array(a)
    if array.size == 0:
        raise ValueError("cannot compress an empty tensor")
    modes = array.shape
    d = len(modes)
    norm = float(np.linalg.norm(array))
    if norm == 0.0:
        return tt_zeros(modes)
    if d == 1:
        return TtTensor((array.reshape(1, modes[0], 1).copy(),))

    threshold = eps * norm / sqrt(d - 1)
    cores: list[np.ndarray] = []
    rank = 1
    remainder = array.reshape(modes[0], -1)
    for k in range(d - 1):
        remainder = remainder.reshape(rank * modes[k], -1)
        u, s, vt = np.linalg.svd(remainder, full_matrices=False)
        new_rank = truncation_rank(s, threshold)
        cores.append(u[:, :new_rank].reshape(rank, modes[k], new_rank))
        remainder = s[:new_rank, None] * vt[:new_rank]
        rank = new_rank
    cores.append(remainder.reshape(rank, modes[-1], 1))
    return TtTensor(tuple(cores))


def right_orthogonalize(t: TtTensor) -> list[np.ndarray]:
    """Return cores of ``t`` with cores 2..d right-orthogonal (QR, right to left)."""

    cores = [core.copy() for core in t.cores]
    for k in range(len(cores) - 1, 0, -1):
        r_left, n, r_right = cores[k].shape
        q, r = np.linalg.qr(cores[k].reshape(r_left, n * r_right).T)
        new_rank = q.shape[1]
        cores[k] = q.T.reshape(new_rank, n, r_right)
        cores[k - 1] = np.einsum("ijk,lk->ijl", cores[k - 1], r)
    return cores


def left_orthogonalize(t: TtTensor) -> list[np.ndarray]:
    """Return cores of ``t`` with cores 1..d-1 left-orthogonal (QR, left to right)."""

    cores = [core.copy() for core in t.cores]
    for k in range(len(cores) - 1):
        r_left, n, r_right = cores[k].shape
        q, r = np.linalg.qr(cores[k].reshape(r_left * n, r_right))
        new_rank = q.shape[1]
        cores[k] = q.reshape(r_left, n, new_rank)
        cores[k + 1] = np.einsum("ij,jkl->ikl", r, cores[k + 1])
    return cores


def tt_round(t: TtTensor, eps: float) -> TtTensor:
    """Recompress ``t`` to relative accuracy ``eps``; ranks never grow."""

    _check_eps(eps)
    if t.d == 1:
        return TtTensor((t.cores[0].copy(),))
    cores = right_orthogonalize(t)
    norm = float(np.linalg.norm(cores[0]))
    if norm == 0.0:
        return tt_zeros(t.mode_sizes)

    threshold = eps * norm / sqrt(t.d - 1)
    for k in range(t.d - 1):
        r_left, n, r_right = cores[k].shape
        u, s, vt = np.linalg.svd(cores[k].reshape(r_left * n, r_right), full_matrices=False)
        rank = truncation_rank(s, threshold)
        cores[k] = u[:, :rank].reshape(r_left, n, rank)
        carry = s[:rank, None] * vt[:rank]
        cores[k + 1] = np.einsum("ij,jkl->ikl", carry, cores[k + 1])
    return TtTensor(tuple(cores))


def tt_add(a: TtTensor, b: TtTensor) -> TtTensor:
    """Sum with block cores; interior ranks add."""

    _check_modes(a, b)
    if a.d == 1:
        return TtTensor((a.cores[0] + b.cores[0],))
    cores: list[np.ndarray] = []
    last = a.d - 1
    for k, (ca, cb) in enumerate(zip(a.cores, b.cores)):
        if k == 0:
            cores.append(np.concatenate([ca, cb], axis=2))
        elif k == last:
            cores.append(np.concatenate([ca, cb], axis=0))
        else:
            ra0, n, ra1 = ca.shape
            rb0, _, rb1 = cb.shape
            block = np.zeros((ra0 + rb0, n, ra1 + rb1))
            block[:ra0, :, :ra1] = ca
            block[ra0:, :, ra1:] = cb
            cores.append(block)
    return TtTensor(tuple(cores))


def tt_sum(terms: Sequence[TtTensor]) -> TtTensor:
    if not terms:
        raise ValueError("tt_sum needs at least one term")
    total = terms[0]
    for term in terms[1:]:
        total = tt_add(total, term)
    return total


def tt_scale(a: TtTensor, c: float) -> TtTensor:
    cores = list(a.cores)
    cores[0] = cores[0] * float(c)
    return TtTensor(tuple(cores))


def tt_hadamard(a: TtTensor, b: TtTensor) -> TtTensor:
    """Element-wise product; interior ranks multiply."""

    _check_modes(a, b)
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        ra0, n, ra1 = ca.shape
        rb0, _, rb1 = cb.shape
        cores.append(np.einsum("aib,cid->acibd", ca, cb).reshape(ra0 * rb0, n, ra1 * rb1))
    return TtTensor(tuple(cores))


def tt_dot(a: TtTensor, b: TtTensor) -> float:
    """Frobenius inner product, contracted left to right."""

    _check_modes(a, b)
    frame = np.ones((1, 1))
    for ca, cb in zip(a.cores, b.cores):
        frame = np.einsum("ab,aic,bid->cd", frame, ca, cb, optimize=True)
    return float(frame[0, 0])


def tt_norm(a: TtTensor) -> float:
    """Frobenius norm via orthogonalization, robust to cancellation."""

    return float(np.linalg.norm(right_orthogonalize(a)[0]))


def partial_reduce_spatial(f: TtTensor) -> DenseTensor:
    """Contract the spatial cores of a ``(x_1..x_D, v_1..v_D)`` tensor.

    Returns the dense tensor ``Y`` of shape ``(m_1, ..., m_D, r_D)`` whose last
    index is the bond to the first velocity core.
    """

    if f.d % 2 != 0 or f.d < 2:
        raise ValueError(f"expected an even number of modes (x then v), got {f.d}")
    dim = f.d // 2
    reduced = f.cores[0].reshape(f.cores[0].shape[1], f.cores[0].shape[2])
    for core in f.cores[1:dim]:
        reduced = np.tensordot(reduced, core, axes=([-1], [0]))
    return DenseTensor(reduced)


def expand(t: TtTensor, position: int, m: int) -> TtTensor:
    """Insert a mode of size ``m`` at 1-based ``position`` along which ``t`` is constant.

    The inserted core is an identity over the bond it splits, so ranks are
    unchanged with the split bond value repeated.
    """

    if not 1 <= position <= t.d + 1:
        raise ValueError(f"position must lie in [1, {t.d + 1}], got {position}")
    if m < 1:
        raise ValueError(f"inserted mode size must be positive, got {m}")
    bond = t.full_ranks[position - 1]
    identity = np.repeat(np.eye(bond)[:, None, :], m, axis=1)
    cores = list(t.cores)
    cores.insert(position - 1, identity)
    return TtTensor(tuple(cores))


def tt_restrict(t: TtTensor, stride: int) -> TtTensor:
    """Keep every ``stride``-th index of every mode (nested-grid restriction)."""

    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    return TtTensor(tuple(np.ascontiguousarray(core[:, ::stride, :]) for core in t.cores))


def describe(t: TtTensor) -> str:
    """Plain-text dump of core shapes and ranks."""

    lines = [
        f"TtTensor d={t.d} modes={list(t.mode_sizes)} ranks={list(t.ranks)} "
        f"params={t.size} max_rank={t.max_rank}"
    ]
    for index, core in enumerate(t.cores):
        lines.append(f"  core {index}: {core.shape[0]} x {core.shape[1]} x {core.shape[2]}")
    return "\n".join(lines)


__all__ = [
    "DenseTensor",
    "TtTensor",
    "describe",
    "expand",
    "left_orthogonalize",
    "partial_reduce_spatial",
    "right_orthogonalize",
    "truncation_rank",
    "tt_add",
    "tt_dot",
    "tt_from_dense",
    "tt_hadamard",
    "tt_norm",
    "tt_ones",
    "tt_rank_one",
    "tt_restrict",
    "tt_round",
    "tt_scale",
    "tt_sum",
    "tt_zeros",
]
