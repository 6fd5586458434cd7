"""Finite-volume simulation of singular-sensitivity chemotaxis with logistic growth.

The solver integrates the regularized system

    u_t = Lap u - chi div(u / ((1 + eps u) v) grad v) + kappa u - mu u^2
    v_t = Lap v - u v / ((1 + eps u)(1 + eps v))

with zero-flux boundaries, and ships two verification engines: a ledger of
a priori bounds checked along the run and a weak-form residual auditor.
"""

from .config import RunConfig, build_initial_data, load_config, parse_config, serialize_config
from .convergence import SweepResult, epsilon_sweep, ode_oracle, refinement_study
from .estimates import BoundConstants, EstimateLedger, bounds_from_data, check, log_mass_identity_residual
from .grid import Grid, build_grid, divergence, face_gradient, integrate, laplacian
from .model import InvariantBreach, ModelParams, State, chemotactic_flux, consumption, logistic_reaction
from .snapshots import read_snapshot, write_snapshot
from .stepper import SolverAbort, StepConfig, Trajectory, admissible_dt, invariant_report, run, step
from .weakform import (
    TestFunction,
    WeakFormReport,
    audit,
    make_test_function,
    standard_suite,
    subsolution_residual,
    supersolution_residual,
    v_identity_residual,
)

__version__ = "0.1.0"

__all__ = [
    "BoundConstants", "EstimateLedger", "Grid", "InvariantBreach", "ModelParams", "RunConfig",
    "SolverAbort", "State", "StepConfig", "SweepResult", "TestFunction", "Trajectory", "WeakFormReport",
    "admissible_dt", "audit", "bounds_from_data", "build_grid", "build_initial_data", "check",
    "chemotactic_flux", "consumption", "divergence", "epsilon_sweep", "face_gradient", "integrate",
    "invariant_report", "laplacian", "load_config", "log_mass_identity_residual", "logistic_reaction",
    "make_test_function", "ode_oracle", "parse_config", "read_snapshot", "refinement_study", "run",
    "serialize_config", "standard_suite", "step", "subsolution_residual", "supersolution_residual",
    "v_identity_residual", "write_snapshot",
]
