"""Tensor-train solver toolkit for the Boltzmann-BGK equation."""

from .config import BgkConfig, dump_config, load_config, make_config
from .errors import (
    AptError,
    ConfigError,
    FieldIOError,
    OracleStagnationError,
    PositivityError,
    SingularLocalSystemError,
    SolverDivergenceError,
)
from .tt_core import DenseTensor, TtTensor, tt_from_dense, tt_norm, tt_round
from .tt_operator import TtOperator, op_apply, op_from_kron_terms
from .linsolve import MalsReport, MalsSettings, mals_solve, residual_norm
from .bgk_model import MacroFields, StepOperators, build_collision_term, build_step_operators, compute_moments
from .diagnostics import ConservationReport, RunDiagnostics, StepRecord, conservation_report
from .dense_oracle import DenseState, dense_cnlf_run, dense_collision, dense_moments
from .integrator import SimulationState, bootstrap_first_step, cnlf_step, iter_simulation, run_simulation
from .scenarios import SCENARIOS, Scenario, get_scenario
from .studies import ConvergenceTable, RunOutcome, convergence_study, run_scenario

__all__ = [
    "BgkConfig",
    "dump_config",
    "load_config",
    "make_config",
    "AptError",
    "ConfigError",
    "FieldIOError",
    "OracleStagnationError",
    "PositivityError",
    "SingularLocalSystemError",
    "SolverDivergenceError",
    "DenseTensor",
    "TtTensor",
    "tt_from_dense",
    "tt_norm",
    "tt_round",
    "TtOperator",
    "op_apply",
    "op_from_kron_terms",
    "MalsReport",
    "MalsSettings",
    "mals_solve",
    "residual_norm",
    "MacroFields",
    "StepOperators",
    "build_collision_term",
    "build_step_operators",
    "compute_moments",
    "ConservationReport",
    "RunDiagnostics",
    "StepRecord",
    "conservation_report",
    "DenseState",
    "dense_cnlf_run",
    "dense_collision",
    "dense_moments",
    "SimulationState",
    "bootstrap_first_step",
    "cnlf_step",
    "iter_simulation",
    "run_simulation",
    "SCENARIOS",
    "Scenario",
    "get_scenario",
    "ConvergenceTable",
    "RunOutcome",
    "convergence_study",
    "run_scenario",
]
