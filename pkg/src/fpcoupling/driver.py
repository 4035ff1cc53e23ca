"""Fixed-schedule time marching with warm starts."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from .solver import (
    Algorithm,
    SolverConfig,
    SolveStatus,
    TargetFunction,
    Vector,
    as_state,
    solve_timestep,
)


@dataclass(frozen=True)
class TimestepSchedule:
    t_start: float
    t_end: float
    dt: float

    def __post_init__(self) -> None:
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def steps(self) -> int:
        # guard against 3600/150 landing a hair above an integer
        return math.ceil(round((self.t_end - self.t_start) / self.dt, 9))

    def times(self) -> list[float]:
        """End time of every step; the last one is clipped to ``t_end``."""
        return [min(self.t_start + (i + 1) * self.dt, self.t_end) for i in range(self.steps)]


class SimulationStatus(str, enum.Enum):
    COMPLETED = "Completed"
    DIVERGED = "Diverged"


@dataclass
class StepSummary:
    index: int
    t: float
    status: SolveStatus
    iterations: int
    beta_init: float
    beta_last: float
    x_initial: Vector
    x_final: Vector
    failures: list[int] = field(default_factory=list)


@dataclass
class SimulationResult:
    status: SimulationStatus
    total_iterations: int
    per_step: list[StepSummary]
    diverged_at_step: Optional[int] = None

    @property
    def completed(self) -> bool:
        return self.status is SimulationStatus.COMPLETED

    @property
    def label(self) -> str:
        if self.completed:
            return "Completed"
        return f"DivergedAtStep({self.diverged_at_step})"

    @property
    def final_state(self) -> Optional[Vector]:
        return self.per_step[-1].x_final if self.per_step else None

    def iteration_counts(self) -> list[int]:
        return [s.iterations for s in self.per_step]


def run_simulation(
    problem: TargetFunction,
    schedule: TimestepSchedule,
    config: SolverConfig,
    x_init: Optional[ArrayLike] = None,
) -> SimulationResult:
    """March ``problem`` over ``schedule``, stopping at the first unconverged step.

    Each step starts from the previous accepted state.  ATK additionally starts
    from the previous step's last relaxation factor; FPI and TPA always use
    ``config.beta``.
    """
    if x_init is None:
        x_init = problem.default_initial_guess(schedule.t_start)
    x = as_state(x_init, "x_init")
    if x.size != problem.dimension:
        raise ValueError(
            f"x_init has dimension {x.size}, problem expects {problem.dimension}"
        )

    beta = config.beta
    t_old = schedule.t_start
    per_step: list[StepSummary] = []
    total = 0
    for index, t in enumerate(schedule.times()):
        result = solve_timestep(problem, t, x, config, beta_init=beta)
        total += result.iterations
        summary = StepSummary(
            index, t, result.status, result.iterations, beta, result.beta_last, x, result.x_final
        )
        per_step.append(summary)
        if not result.converged:
            return SimulationResult(SimulationStatus.DIVERGED, total, per_step, index)
        summary.failures = list(problem.advance_time(result.x_final, t_old, t) or [])
        x = result.x_final
        if config.algorithm is Algorithm.ATK:
            beta = result.beta_last
        t_old = t
    return SimulationResult(SimulationStatus.COMPLETED, total, per_step)


def cascade_lengths(result: SimulationResult) -> list[int]:
    """Lengths of runs of consecutive steps that each disconnected a fracture."""
    runs, current = [], 0
    for step in result.per_step:
        if step.failures:
            current += 1
        elif current:
            runs.append(current)
            current = 0
    if current:
        runs.append(current)
    return runs


def mean_iterations(result: SimulationResult) -> float:
    counts = result.iteration_counts()
    return float(np.mean(counts)) if counts else math.nan
