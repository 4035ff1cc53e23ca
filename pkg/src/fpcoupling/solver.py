"""Picard, Aitken and two-point Anderson iterations for ``x = G(x, t)``.

All three schemes share one loop (:func:`solve_timestep`): evaluate ``G`` once,
test the relative stop condition, then build the next iterate.  The update
rules are exposed as small pure functions so they can be tested in isolation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

Vector = NDArray[np.float64]


class Algorithm(str, enum.Enum):
    FPI = "FPI"
    ATK = "ATK"
    TPA = "TPA"


class SolveStatus(str, enum.Enum):
    CONVERGED = "Converged"
    DIVERGED_ITERATION_CAP = "DivergedIterationCap"
    NON_FINITE_EVALUATION = "NonFiniteEvaluation"


class TargetFunction(Protocol):
    """What the solver needs from a coupled problem."""

    dimension: int

    def evaluate(self, x: Vector, t: float) -> Vector: ...

    def advance_time(self, x: Vector, t_old: float, t_new: float) -> list: ...


def as_state(values: ArrayLike, name: str = "x") -> Vector:
    """Return ``values`` as a 1-D float64 array, rejecting NaN/Inf."""
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _check_pair(a: Vector, b: Vector, names: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch between {names}: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError(f"non-finite input in {names}")


def _norm(v: Vector) -> float:
    return math.sqrt(float(v.dot(v)))


def _check_scalar(value: float, name: str) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class Residual:
    f: Vector
    norm: float

    @classmethod
    def of(cls, g: Vector, x: Vector) -> "Residual":
        f = g - x
        return cls(f, _norm(f))


@dataclass
class SolverConfig:
    """Settings shared by every timestep of a run.

    ``beta`` is the fixed relaxation factor for FPI/TPA and the initial factor
    for ATK.  ``beta_clamp`` bounds ``|beta_k|`` for ATK only.
    """

    algorithm: Algorithm
    beta: float
    epsilon: float
    n_crit: int
    guard_epsilon: float = 1e-10
    zero_norm_floor: float = 1e-300
    beta_clamp: Optional[tuple[float, float]] = None

    def __post_init__(self) -> None:
        self.algorithm = Algorithm(self.algorithm)
        if not (0.0 < self.beta <= 1.0):
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.n_crit) != self.n_crit or self.n_crit < 1:
            raise ValueError(f"n_crit must be a positive integer, got {self.n_crit}")
        self.n_crit = int(self.n_crit)
        if not self.guard_epsilon > 0:
            raise ValueError(f"guard_epsilon must be positive, got {self.guard_epsilon}")
        if self.zero_norm_floor < 0:
            raise ValueError("zero_norm_floor must be non-negative")
        if self.beta_clamp is not None:
            lo, hi = self.beta_clamp
            if not (0.0 < lo <= hi):
                raise ValueError(f"beta_clamp must satisfy 0 < lo <= hi, got {self.beta_clamp}")
            self.beta_clamp = (float(lo), float(hi))


@dataclass(frozen=True)
class IterationRecord:
    k: int
    residual_norm: float
    state_norm: float
    beta_used: float
    alpha_used: Optional[float] = None
    guard_triggered: bool = False


@dataclass
class TimestepSolveResult:
    status: SolveStatus
    x_final: Vector
    iterations: int
    beta_last: float
    trace: list[IterationRecord] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED


# -- update rules -------------------------------------------------------------


def picard_step(x: Vector, g: Vector, beta: float) -> Vector:
    """Relaxed fixed-point update ``beta*g + (1 - beta)*x``."""
    _check_pair(x, g, "x and g")
    _check_scalar(beta, "beta")
    if beta == 0:
        raise ValueError("beta must be nonzero")
    return beta * g + (1.0 - beta) * x


def _combine(x_prev, x_curr, g_prev, g_curr, alpha: float, beta: float) -> Vector:
    if alpha == 1.0:
        return beta * g_curr + (1.0 - beta) * x_curr
    if alpha == 0.0:
        return beta * g_prev + (1.0 - beta) * x_prev
    return alpha * (beta * g_curr + (1.0 - beta) * x_curr) + (1.0 - alpha) * (
        beta * g_prev + (1.0 - beta) * x_prev
    )


def aitken_relaxation_factor(
    f_prev: Vector, f_curr: Vector, beta_prev: float, guard_epsilon: float = 1e-10
) -> tuple[float, bool]:
    """Next Aitken relaxation factor from two consecutive residuals.

    Returns ``(beta_next, guard_triggered)``.  When the residual difference is
    shorter than ``guard_epsilon`` the previous factor is returned unchanged and
    the caller should take a plain Picard step with it.
    """
    _check_pair(f_prev, f_curr, "residuals")
    _check_scalar(beta_prev, "beta_prev")
    if beta_prev == 0:
        raise ValueError("beta_prev must be nonzero")
    diff = f_curr - f_prev
    if _norm(diff) < guard_epsilon:
        return beta_prev, True
    return float(-beta_prev * f_prev.dot(diff) / diff.dot(diff)), False


def anderson_alpha(
    f_prev: Vector, f_curr: Vector, guard_epsilon: float = 1e-10
) -> tuple[float, bool]:
    """Weight on the current iterate minimising ``||a*f_curr + (1-a)*f_prev||``.

    Falls back to ``(1.0, True)``, i.e. a pure Picard step from the current
    iterate, when the two residuals are closer than ``guard_epsilon``.
    """
    _check_pair(f_prev, f_curr, "residuals")
    diff = f_prev - f_curr
    if _norm(diff) < guard_epsilon:
        return 1.0, True
    return float(diff.dot(f_prev) / diff.dot(diff)), False


def anderson_step(
    x_prev: Vector,
    x_curr: Vector,
    g_prev: Vector,
    g_curr: Vector,
    alpha: float,
    beta: float,
) -> Vector:
    """Affine combination of the two relaxed Picard points with weight ``alpha``."""
    _check_pair(x_prev, x_curr, "x_prev and x_curr")
    _check_pair(g_prev, g_curr, "g_prev and g_curr")
    _check_pair(x_curr, g_curr, "x_curr and g_curr")
    _check_scalar(alpha, "alpha")
    _check_scalar(beta, "beta")
    # degenerate weights reproduce the Picard step bit for bit
    return _combine(x_prev, x_curr, g_prev, g_curr, alpha, beta)


def check_stop(
    x: Vector, g: Vector, epsilon: float, zero_norm_floor: float = 1e-300
) -> bool:
    """Relative stop test ``||g - x|| <= epsilon * max(||x||, floor)``."""
    _check_pair(x, g, "x and g")
    return bool(_norm(g - x) <= epsilon * max(_norm(x), zero_norm_floor))


def _clamp_beta(beta: float, clamp: Optional[tuple[float, float]]) -> float:
    if clamp is None:
        return beta
    lo, hi = clamp
    return math.copysign(min(max(abs(beta), lo), hi), beta)


# -- single timestep ----------------------------------------------------------


def solve_timestep(
    G: TargetFunction,
    t: float,
    x0: ArrayLike,
    config: SolverConfig,
    beta_init: Optional[float] = None,
) -> TimestepSolveResult:
    """Solve ``x = G(x, t)`` starting from ``x0``.

    ``G`` is evaluated exactly once per iteration, and ``iterations`` in the
    result counts those evaluations.  For ATK, ``beta_init`` overrides
    ``config.beta`` as the starting factor (used for cross-timestep carryover).
    """
    x = as_state(x0, "x0")
    if x.size != G.dimension:
        raise ValueError(f"x0 has dimension {x.size}, problem expects {G.dimension}")
    algorithm = config.algorithm
    beta = config.beta if beta_init is None else float(beta_init)
    _check_scalar(beta, "beta_init")
    if beta == 0:
        raise ValueError("beta_init must be nonzero")
    if algorithm is not Algorithm.ATK:
        beta = config.beta

    trace: list[IterationRecord] = []
    x_prev: Optional[Vector] = None
    g_prev: Optional[Vector] = None
    f_prev: Optional[Vector] = None

    for k in range(config.n_crit):
        g = np.asarray(G.evaluate(x, t), dtype=np.float64)
        if g.shape != x.shape:
            raise ValueError(f"G returned shape {g.shape}, expected {x.shape}")
        if not np.all(np.isfinite(g)):
            trace.append(
                IterationRecord(k, math.nan, _norm(x), beta)
            )
            return TimestepSolveResult(
                SolveStatus.NON_FINITE_EVALUATION, x, k + 1, beta, trace
            )
        f = g - x
        f_norm = _norm(f)
        x_norm = _norm(x)

        if f_norm <= config.epsilon * max(x_norm, config.zero_norm_floor):
            trace.append(IterationRecord(k, f_norm, x_norm, beta))
            return TimestepSolveResult(SolveStatus.CONVERGED, x, k + 1, beta, trace)

        # same arithmetic as picard_step/anderson_step, minus the input checks
        alpha: Optional[float] = None
        guard = False
        if f_prev is None or algorithm is Algorithm.FPI:
            x_next = beta * g + (1.0 - beta) * x
        elif algorithm is Algorithm.ATK:
            diff = f - f_prev
            if _norm(diff) < config.guard_epsilon:
                guard = True
            else:
                beta = _clamp_beta(
                    float(-beta * f_prev.dot(diff) / diff.dot(diff)), config.beta_clamp
                )
            x_next = beta * g + (1.0 - beta) * x
        else:
            diff = f_prev - f
            if _norm(diff) < config.guard_epsilon:
                guard = True
                alpha = 1.0
                x_next = beta * g + (1.0 - beta) * x
            else:
                alpha = float(diff.dot(f_prev) / diff.dot(diff))
                x_next = _combine(x_prev, x, g_prev, g, alpha, beta)

        trace.append(IterationRecord(k, f_norm, x_norm, beta, alpha, guard))
        x_prev, g_prev, f_prev = x, g, f
        x = x_next

    return TimestepSolveResult(
        SolveStatus.DIVERGED_ITERATION_CAP, x, config.n_crit, beta, trace
    )


def residual_norms(result: TimestepSolveResult) -> Sequence[float]:
    return [rec.residual_norm for rec in result.trace]
