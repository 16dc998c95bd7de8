"""Binary field dumps shared by the TT pipeline and the dense oracle.

Dense dump::

    APTT1 <D> <m> <order>\\n
    <m**order little-endian float64 values, C order>

TT dump::

    APTT1-TT <D> <m> <order>\\n
    <r_0 r_1 ... r_order>\\n
    <core 1 values, C order> ... <core order values>
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FieldIOError
from .tt_core import DenseTensor, TtTensor

DENSE_MAGIC = "APTT1"
TT_MAGIC = "APTT1-TT"
_DTYPE = np.dtype("<f8")


def _header(magic: str, dim: int, m: int, order: int) -> bytes:
    return f"{magic} {dim} {m} {order}\n".encode("ascii")


def _parse_header(line: bytes, magic: str) -> tuple[int, int, int]:
    try:
        parts = line.decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise FieldIOError("field dump header is not ASCII") from exc
    if len(parts) != 4 or parts[0] != magic:
        raise FieldIOError(f"expected a {magic} header, got {line[:40]!r}")
    try:
        dim, m, order = (int(p) for p in parts[1:])
    except ValueError as exc:
        raise FieldIOError(f"malformed field dump header {line!r}") from exc
    if order != 2 * dim or m < 1:
        raise FieldIOError(f"inconsistent field dump header D={dim} m={m} order={order}")
    return dim, m, order


def _read(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FieldIOError(f"cannot read field dump {path}: {exc}") from exc


def _write(path: str | Path, payload: bytes) -> None:
    try:
        Path(path).write_bytes(payload)
    except OSError as exc:
        raise FieldIOError(f"cannot write field dump {path}: {exc}") from exc


def write_dense_dump(path: str | Path, tensor: DenseTensor, dim: int) -> None:
    modes = tensor.mode_sizes
    if len(modes) != 2 * dim or len(set(modes)) != 1:
        raise ValueError(f"dense dump needs {2 * dim} equal modes, got {modes}")
    body = np.ascontiguousarray(tensor.values, dtype=_DTYPE).tobytes(order="C")
    _write(path, _header(DENSE_MAGIC, dim, modes[0], len(modes)) + body)


def read_dense_dump(path: str | Path) -> tuple[DenseTensor, int]:
    """Return the tensor and its spatial dimension."""

    raw = _read(path)
    line, sep, body = raw.partition(b"\n")
    if not sep:
        raise FieldIOError(f"{path}: missing header line")
    dim, m, order = _parse_header(line, DENSE_MAGIC)
    expected = m**order * _DTYPE.itemsize
    if len(body) != expected:
        raise FieldIOError(f"{path}: expected {expected} data bytes, found {len(body)}")
    values = np.frombuffer(body, dtype=_DTYPE).astype(np.float64)
    return DenseTensor(values.reshape((m,) * order)), dim


def write_tt_dump(path: str | Path, tensor: TtTensor, dim: int) -> None:
    modes = tensor.mode_sizes
    if len(modes) != 2 * dim or len(set(modes)) != 1:
        raise ValueError(f"TT dump needs {2 * dim} equal modes, got {modes}")
    preamble = " ".join(str(r) for r in tensor.full_ranks).encode("ascii") + b"\n"
    body = b"".join(np.ascontiguousarray(core, dtype=_DTYPE).tobytes(order="C") for core in tensor.cores)
    _write(path, _header(TT_MAGIC, dim, modes[0], len(modes)) + preamble + body)


def read_tt_dump(path: str | Path) -> tuple[TtTensor, int]:
    raw = _read(path)
    line, sep, rest = raw.partition(b"\n")
    if not sep:
        raise FieldIOError(f"{path}: missing header line")
    dim, m, order = _parse_header(line, TT_MAGIC)
    ranks_line, sep, body = rest.partition(b"\n")
    if not sep:
        raise FieldIOError(f"{path}: missing rank preamble")
    try:
        ranks = [int(r) for r in ranks_line.decode("ascii").split()]
    except (UnicodeDecodeError, ValueError) as exc:
        raise FieldIOError(f"{path}: malformed rank preamble {ranks_line[:60]!r}") from exc
    if len(ranks) != order + 1 or ranks[0] != 1 or ranks[-1] != 1 or min(ranks) < 1:
        raise FieldIOError(f"{path}: invalid rank preamble {ranks}")

    shapes = [(ranks[k], m, ranks[k + 1]) for k in range(order)]
    expected = sum(r0 * n * r1 for r0, n, r1 in shapes) * _DTYPE.itemsize
    if len(body) != expected:
        raise FieldIOError(f"{path}: expected {expected} data bytes, found {len(body)}")
    values = np.frombuffer(body, dtype=_DTYPE).astype(np.float64)
    cores = []
    offset = 0
    for shape in shapes:
        count = shape[0] * shape[1] * shape[2]
        cores.append(values[offset : offset + count].reshape(shape))
        offset += count
    return TtTensor(tuple(cores)), dim


def read_field_dump(path: str | Path) -> tuple[TtTensor | DenseTensor, int]:
    """Read either dump kind, dispatching on the header magic."""

    head = _read(path).split(b" ", 1)[0]
    if head == TT_MAGIC.encode("ascii"):
        return read_tt_dump(path)
    if head == DENSE_MAGIC.encode("ascii"):
        return read_dense_dump(path)
    raise FieldIOError(f"{path}: not a field dump (header starts with {head[:20]!r})")


__all__ = [
    "DENSE_MAGIC",
    "TT_MAGIC",
    "read_dense_dump",
    "read_field_dump",
    "read_tt_dump",
    "write_dense_dump",
    "write_tt_dump",
]
