"""Hybrid coarse/fine planar-pushing prediction via parallel-in-time
integration, plus a sampling-based MPC push planner built on it."""

__version__ = "0.1.0"

from .coarse_model import CoarseParams, coarse_rollout, coarse_step
from .core import (
    Box,
    Control,
    Disc,
    DiscRegion,
    ErrorReport,
    InvalidArgumentError,
    OptimizationFailedError,
    SceneSpec,
    SceneValidationError,
    SimulationUnstableError,
    State,
    TableBounds,
    Trajectory,
    make_controls,
    trajectory_error,
    validate_scene,
    wrap_angle,
)
from .fine_model import PhysicsParams, fine_rollout, fine_step
from .geometry import ContactQuery, SweepResult, penetration, project_feasible, sweep_contact
from .mpc import EpisodeResult, MPCConfig, run_benchmark, run_episode
from .optimizer import CostWeights, OptimizerConfig, final_cost, optimize, running_cost, trajectory_cost
from .parareal import (
    PararealConfig,
    PararealResult,
    convergence_report,
    make_rollout,
    parareal_predict,
    predicted_speedup,
)

__all__ = [
    "Box",
    "CoarseParams",
    "ContactQuery",
    "Control",
    "CostWeights",
    "Disc",
    "DiscRegion",
    "EpisodeResult",
    "ErrorReport",
    "InvalidArgumentError",
    "MPCConfig",
    "OptimizationFailedError",
    "OptimizerConfig",
    "PararealConfig",
    "PararealResult",
    "PhysicsParams",
    "SceneSpec",
    "SceneValidationError",
    "SimulationUnstableError",
    "State",
    "SweepResult",
    "TableBounds",
    "Trajectory",
    "coarse_rollout",
    "coarse_step",
    "convergence_report",
    "final_cost",
    "fine_rollout",
    "fine_step",
    "make_controls",
    "make_rollout",
    "optimize",
    "parareal_predict",
    "penetration",
    "predicted_speedup",
    "project_feasible",
    "run_benchmark",
    "run_episode",
    "running_cost",
    "sweep_contact",
    "trajectory_cost",
    "trajectory_error",
    "validate_scene",
    "wrap_angle",
]
