"""Minimizing-movement solver for phase-field Willmore flow with fixed volume and area."""
from .constraints import (
    ConstraintSpec,
    beta_alpha_estimate,
    construct_feasible,
    feasibility_report,
    minimize_area,
    retract_to_manifold,
    z_empty_sufficient,
)
from .errors import (
    DegenerateDirection,
    InfeasibleBeta,
    InfeasibleInitial,
    MarginCollapse,
    NoConvergence,
    StepFailure,
    WPFError,
)
from .flow import (
    RunConfig,
    Trajectory,
    check_estimates,
    continuous_dependence_harness,
    evolve,
)
from .functionals import (
    PhaseState,
    PotentialParams,
    area_F,
    chemical_potential,
    energy_E,
    grad_E,
    make_state,
)
from .grid import Grid
from .kernels import BACKEND
from .neumann import NeumannPlan
from .stepper import StepConfig, StepReport, proximal_step

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConstraintSpec", "DegenerateDirection", "Grid", "InfeasibleBeta",
    "InfeasibleInitial", "MarginCollapse", "NeumannPlan", "NoConvergence", "PhaseState",
    "PotentialParams", "RunConfig", "StepConfig", "StepFailure", "StepReport", "Trajectory",
    "WPFError", "area_F", "beta_alpha_estimate", "chemical_potential", "check_estimates",
    "construct_feasible", "continuous_dependence_harness", "energy_E", "evolve",
    "feasibility_report", "grad_E", "make_state", "minimize_area", "proximal_step",
    "retract_to_manifold", "z_empty_sufficient",
]
