"""Target functions ``G(x, t)`` for the solvers.

* :class:`LinearAffineProblem` -- ``G(x) = A x + b`` with a known fixed point.
* :class:`OscillatingProblem` -- a contraction around a moving fixed point
  ``x*(t)``; a cheap stand-in for rate oscillations in a slugging well.
* :class:`ToyWellFractureProblem` -- a single-phase well with a surface choke
  coupled to fractures that disconnect when their inflow velocity gets too
  high.  Reproduces the cascade of failures seen during aggressive flowback.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike

from .solver import Vector, as_state

GRAVITY = 9.80665  # m/s^2


class LinearAffineProblem:
    """``G(x) = matrix @ x + offset``; time-independent."""

    def __init__(self, matrix: ArrayLike, offset: ArrayLike):
        self.matrix = np.array(matrix, dtype=np.float64)
        self.offset = as_state(offset, "offset")
        n = self.offset.size
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix must be {n}x{n}, got {self.matrix.shape}")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("matrix contains non-finite entries")
        self.dimension = n
        self.contraction_factor = float(np.linalg.norm(self.matrix, 2))
        system = np.eye(n) - self.matrix
        if np.linalg.matrix_rank(system) < n:
            self.fixed_point: Optional[Vector] = None
        else:
            self.fixed_point = np.linalg.solve(system, self.offset)

    @classmethod
    def random(cls, dimension: int, contraction: float, seed: int = 0) -> "LinearAffineProblem":
        """Random dense problem whose matrix has spectral norm ``contraction``."""
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((dimension, dimension))
        a *= contraction / np.linalg.norm(a, 2)
        return cls(a, rng.standard_normal(dimension))

    def evaluate(self, x: Vector, t: float = 0.0) -> Vector:
        return self.matrix @ x + self.offset

    def advance_time(self, x: Vector, t_old: float, t_new: float) -> list:
        return []

    def default_initial_guess(self, t: float = 0.0) -> Vector:
        if self.fixed_point is None:
            return np.ones(self.dimension)
        return self.fixed_point + 1.0


class OscillatingProblem:
    """Contraction ``x*(t) + M (x - x*(t))`` around a sinusoidal fixed point.

    ``M`` is symmetric with singular values spaced geometrically from
    ``contraction`` down to ``contraction / stiffness``.  Component ``i`` of the
    fixed point is ``amplitude * sin(omega*t + 2*pi*i/n)``, so for ``n >= 3``
    its norm stays at ``amplitude * sqrt(n/2)``.
    """

    def __init__(
        self,
        dimension: int = 4,
        amplitude: float = 1.0,
        angular_frequency: float = 2.0 * np.pi / 3600.0,
        contraction: float = 0.9,
        stiffness: float = 10.0,
        seed: int = 0,
        initial_offset: float = 0.1,
    ):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        if not 0.0 < contraction < 1.0:
            raise ValueError(f"contraction must lie in (0, 1), got {contraction}")
        if stiffness < 1.0:
            raise ValueError(f"stiffness must be >= 1, got {stiffness}")
        self.dimension = dimension
        self.amplitude = float(amplitude)
        self.angular_frequency = float(angular_frequency)
        self.contraction = float(contraction)
        self.stiffness = float(stiffness)
        self.initial_offset = float(initial_offset)
        self.phases = 2.0 * np.pi * np.arange(dimension) / dimension

        rng = np.random.default_rng(seed)
        q, _ = np.linalg.qr(rng.standard_normal((dimension, dimension)))
        sigma = contraction * stiffness ** (-np.linspace(0.0, 1.0, dimension))
        self.matrix = (q * sigma) @ q.T

    def fixed_point(self, t: float) -> Vector:
        return self.amplitude * np.sin(self.angular_frequency * t + self.phases)

    def evaluate(self, x: Vector, t: float) -> Vector:
        xs = self.fixed_point(t)
        return xs + self.matrix @ (x - xs)

    def advance_time(self, x: Vector, t_old: float, t_new: float) -> list:
        return []

    def default_initial_guess(self, t: float = 0.0) -> Vector:
        return self.fixed_point(t) + self.initial_offset * self.amplitude


PerFracture = Union[float, Sequence[float]]


@dataclass(frozen=True)
class ScheduleEntry:
    """Surface controls applied from time ``t`` onward."""

    t: float
    choke_diam: float  # 1/64 inch
    p_whdc: float  # Pa


class ToyWellFractureProblem:
    """Fractures feeding one well through a surface choke.

    The unknown is the vector of per-fracture volumetric rates (m^3/s).  Cell 0
    is at the heel; the rate flowing past cell ``i`` is the sum of inflows from
    cells ``i..n-1``.  A fracture fails for good once its converged rate over
    its flow area exceeds its critical velocity; failures are only committed
    between timesteps in :meth:`advance_time`.
    """

    def __init__(
        self,
        n_frac: int,
        depth: PerFracture,
        rho: float,
        friction_k: float,
        choke_k: float,
        p_res: float,
        productivity_index: PerFracture,
        area: PerFracture,
        v_crit: PerFracture,
        schedule: Sequence[ScheduleEntry],
    ):
        if n_frac < 1:
            raise ValueError("n_frac must be positive")
        self.n_frac = self.dimension = n_frac
        self.depth = self._per_fracture(depth, "depth")
        self.productivity_index = self._per_fracture(productivity_index, "productivity_index")
        self.area = self._per_fracture(area, "area")
        self.v_crit = self._per_fracture(v_crit, "v_crit")
        if np.any(self.area <= 0):
            raise ValueError("area must be positive")
        self.rho = float(rho)
        self.friction_k = float(friction_k)
        self.choke_k = float(choke_k)
        self.p_res = float(p_res)
        if not schedule:
            raise ValueError("schedule needs at least one entry")
        self.schedule = sorted(schedule, key=lambda e: e.t)
        if any(e.choke_diam <= 0 for e in self.schedule):
            raise ValueError("choke_diam must be positive")
        self._schedule_times = [e.t for e in self.schedule]
        self.alive = np.ones(n_frac, dtype=bool)
        self.failure_log: list[tuple[float, list[int]]] = []
        self.current_controls = self.controls_at(self.schedule[0].t)

    def _per_fracture(self, value: PerFracture, name: str) -> Vector:
        arr = np.broadcast_to(np.asarray(value, dtype=np.float64), (self.n_frac,)).copy()
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contains non-finite entries")
        return arr

    def controls_at(self, t: float) -> ScheduleEntry:
        i = bisect.bisect_right(self._schedule_times, t) - 1
        return self.schedule[max(i, 0)]

    def choke_pressure_drop(self, q_total: float, choke_diam: float) -> float:
        return choke_pressure_drop(q_total, choke_diam, self.choke_k)

    def well_pressures(self, rates: Vector, t: float) -> Vector:
        q = np.asarray(rates, dtype=np.float64)
        if not np.all(np.isfinite(q)):
            raise ValueError("rates contain non-finite entries")
        ctl = self.controls_at(t)
        passing = np.cumsum(q[::-1])[::-1]
        total = float(passing[0])
        # total may be slightly negative on a wild iterate; the choke law is even in q
        choke = self.choke_k * total * total / ctl.choke_diam**4
        return ctl.p_whdc + choke + self.rho * GRAVITY * self.depth + self.friction_k * passing**2

    def fracture_rates(self, pressures: Vector, t: float) -> Vector:
        p = np.asarray(pressures, dtype=np.float64)
        if not np.all(np.isfinite(p)):
            raise ValueError("pressures contain non-finite entries")
        return np.where(
            self.alive, self.productivity_index * np.maximum(self.p_res - p, 0.0), 0.0
        )

    def evaluate(self, x: Vector, t: float) -> Vector:
        return self.fracture_rates(self.well_pressures(x, t), t)

    def advance_time(self, x: Vector, t_old: float, t_new: float) -> list[int]:
        """Disconnect fractures whose converged inflow velocity is supercritical."""
        velocity = np.asarray(x, dtype=np.float64) / self.area
        failed = np.flatnonzero(self.alive & (velocity > self.v_crit))
        self.alive[failed] = False
        self.current_controls = self.controls_at(t_new)
        failed_list = [int(i) for i in failed]
        if failed_list:
            self.failure_log.append((t_new, failed_list))
        return failed_list

    def default_initial_guess(self, t: float = 0.0) -> Vector:
        return np.zeros(self.n_frac)


def choke_pressure_drop(q_total: float, choke_diam: float, choke_k: float = 1.0) -> float:
    """Orifice-law pressure drop ``choke_k * q**2 / d**4`` across the surface choke."""
    if q_total < 0:
        raise ValueError(f"rate must be non-negative, got {q_total}")
    if choke_diam <= 0:
        raise ValueError(f"choke diameter must be positive, got {choke_diam}")
    return choke_k * q_total**2 / choke_diam**4
