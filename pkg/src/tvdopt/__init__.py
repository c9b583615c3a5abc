"""Decentralized projected gradient methods over time-varying networks."""

from .baselines import diging, extra
from .consensus import distance_to_consensus, project_consensus, rounds_needed, run_consensus
from .objectives import (
    LocalObjective,
    SpectralConstants,
    coercivity_check,
    estimate_constants,
    logistic_objective,
    quadratic_family,
)
from .optimizers import (
    AccuracyBudget,
    SolverConfig,
    Trajectory,
    accelerated_projected_gd,
    communication_budget,
    decentralized_projected_gd,
    epsilon1_for_target,
    exact_projected_gd,
    outer_iteration_count,
)
from .topology import (
    Graph,
    MixingSchedule,
    build_schedule,
    metropolis_weights,
    verify_assumption,
    window_delta,
    window_product,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyBudget",
    "Graph",
    "LocalObjective",
    "MixingSchedule",
    "SolverConfig",
    "SpectralConstants",
    "Trajectory",
    "accelerated_projected_gd",
    "build_schedule",
    "coercivity_check",
    "communication_budget",
    "decentralized_projected_gd",
    "diging",
    "distance_to_consensus",
    "epsilon1_for_target",
    "estimate_constants",
    "exact_projected_gd",
    "extra",
    "logistic_objective",
    "metropolis_weights",
    "outer_iteration_count",
    "project_consensus",
    "quadratic_family",
    "rounds_needed",
    "run_consensus",
    "verify_assumption",
    "window_delta",
    "window_product",
]
