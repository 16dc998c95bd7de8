"""Error hierarchy shared by the solver, the oracle and the harness.

Every error that can abort a run carries the process exit code the CLI reports
for it, so the harness never needs to map exception types by hand.
"""
from __future__ import annotations

from typing import TYPE_CHECKING, Any, Sequence

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .diagnostics import RunDiagnostics
    from .linsolve import MalsReport


class AptError(Exception):
    """Base class for run-aborting errors."""

    exit_code: int = 1

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.diagnostics: RunDiagnostics | None = None


class ConfigError(AptError):
    """Configuration could not be parsed or violates a field constraint."""

    exit_code = 2

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None) -> None:
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
        self.field = field
        self.line = line


class SolverDivergenceError(AptError):
    """MALS stopped at ``max_sweeps`` without reaching ``eps_d``."""

    exit_code = 3

    def __init__(self, report: MalsReport, *, step: int | None = None) -> None:
        where = f" at step {step}" if step is not None else ""
        super().__init__(
            f"MALS did not converge{where}: residual {report.final_residual:.3e} "
            f"after {report.sweeps_used} sweeps"
        )
        self.report = report
        self.step = step


class SingularLocalSystemError(AptError):
    """A two-site local system could not be solved."""

    exit_code = 3

    def __init__(self, bond: int, detail: str = "") -> None:
        suffix = f": {detail}" if detail else ""
        super().__init__(f"singular local system at bond {bond}{suffix}")
        self.bond = bond


class OracleStagnationError(AptError):
    """The dense reference GMRES solve did not reach its tolerance."""

    exit_code = 3


class PositivityError(AptError):
    """Density or temperature is not strictly positive at some node."""

    exit_code = 4

    def __init__(self, field: str, node: Sequence[int], value: float) -> None:
        index = tuple(int(i) for i in node)
        super().__init__(
            f"{field} = {value:.6g} <= 0 at node {index}; the BGK closure assumes "
            "no vacuum (strictly positive density and temperature)"
        )
        self.field = field
        self.node = index
        self.value = value


class FieldIOError(AptError):
    """Reading or writing an output artefact failed."""

    exit_code = 5


def exit_code_for(exc: BaseException) -> int:
    """Return the CLI exit status associated with ``exc``."""

    if isinstance(exc, AptError):
        return exc.exit_code
    if isinstance(exc, OSError):
        return FieldIOError.exit_code
    return 1


def attach_diagnostics(exc: AptError, diagnostics: Any) -> AptError:
    exc.diagnostics = diagnostics
    return exc


__all__ = [
    "AptError",
    "ConfigError",
    "FieldIOError",
    "OracleStagnationError",
    "PositivityError",
    "SingularLocalSystemError",
    "SolverDivergenceError",
    "attach_diagnostics",
    "exit_code_for",
]
