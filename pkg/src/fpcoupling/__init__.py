"""Relaxed Picard, Aitken and two-point Anderson solvers for coupled fixed-point problems."""

from .bounds import anderson_sufficient_factor, contraction_bound, nonexpansive_bound
from .driver import SimulationResult, TimestepSchedule, run_simulation
from .problems import LinearAffineProblem, OscillatingProblem, ToyWellFractureProblem
from .solver import (
    Algorithm,
    IterationRecord,
    SolverConfig,
    SolveStatus,
    TimestepSolveResult,
    aitken_relaxation_factor,
    anderson_alpha,
    anderson_step,
    check_stop,
    picard_step,
    solve_timestep,
)

__all__ = [
    "Algorithm",
    "IterationRecord",
    "LinearAffineProblem",
    "OscillatingProblem",
    "SimulationResult",
    "SolveStatus",
    "SolverConfig",
    "TimestepSchedule",
    "TimestepSolveResult",
    "ToyWellFractureProblem",
    "aitken_relaxation_factor",
    "anderson_alpha",
    "anderson_step",
    "anderson_sufficient_factor",
    "check_stop",
    "contraction_bound",
    "nonexpansive_bound",
    "picard_step",
    "run_simulation",
    "solve_timestep",
]
