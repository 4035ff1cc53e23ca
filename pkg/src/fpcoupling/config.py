"""JSON run configuration: strict schema, validated before anything runs."""

from __future__ import annotations

import itertools
import json
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .driver import TimestepSchedule
from .problems import LinearAffineProblem, OscillatingProblem, ScheduleEntry, ToyWellFractureProblem
from .solver import Algorithm, SolverConfig


class ConfigError(Exception):
    """Raised for unreadable, malformed or invalid configuration files."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _check_beta(value: float) -> float:
    if not 0.0 < value <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {value}")
    return value


class LinearAffineConfig(_Strict):
    """Either an explicit ``matrix``/``offset`` pair or a seeded random problem."""

    type: Literal["linear_affine"]
    matrix: Optional[list[list[float]]] = None
    offset: Optional[list[float]] = None
    dimension: Optional[int] = Field(default=None, ge=1)
    contraction: Optional[float] = Field(default=None, ge=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def _one_source(self) -> "LinearAffineConfig":
        explicit = self.matrix is not None or self.offset is not None
        generated = self.dimension is not None or self.contraction is not None
        if explicit == generated:
            raise ValueError("give either matrix and offset, or dimension and contraction")
        if explicit and (self.matrix is None or self.offset is None):
            raise ValueError("matrix and offset must be given together")
        if generated and (self.dimension is None or self.contraction is None):
            raise ValueError("dimension and contraction must be given together")
        return self

    def build(self) -> LinearAffineProblem:
        if self.matrix is not None:
            return LinearAffineProblem(self.matrix, self.offset)
        return LinearAffineProblem.random(self.dimension, self.contraction, self.seed)


class OscillatingConfig(_Strict):
    type: Literal["oscillating"]
    # below 3 components the fixed point passes through zero and the relative
    # stop test becomes unreachable
    dimension: int = Field(default=4, ge=3)
    amplitude: float = Field(default=1.0, gt=0.0)
    angular_frequency: float = Field(default=2.0 * np.pi / 3600.0, description="rad/s")
    contraction: float = Field(default=0.9, gt=0.0, lt=1.0)
    stiffness: float = Field(default=10.0, ge=1.0)
    seed: int = 0
    initial_offset: float = 0.1

    def build(self) -> OscillatingProblem:
        return OscillatingProblem(**self.model_dump(exclude={"type"}))


class LinearRange(_Strict):
    lo: float
    hi: float


class ScheduleEntryConfig(_Strict):
    t: float
    choke_diam: float = Field(gt=0.0, description="1/64 inch")
    p_whdc: float = Field(description="Pa")


PerFracture = Union[float, list[float]]


class ToyWellFractureConfig(_Strict):
    type: Literal["toy_well_fracture"]
    n_frac: int = Field(ge=1)
    depth: PerFracture = Field(description="m")
    rho: float = Field(gt=0.0, description="kg/m^3")
    friction_k: float = Field(ge=0.0, description="Pa s^2/m^6")
    choke_k: float = Field(ge=0.0, description="Pa (1/64 in)^4 s^2/m^6")
    p_res: float = Field(description="Pa")
    productivity_index: PerFracture = Field(description="m^3/s/Pa")
    area: PerFracture = Field(description="m^2")
    v_crit: Union[PerFracture, LinearRange] = Field(description="m/s")
    schedule: list[ScheduleEntryConfig] = Field(min_length=1)

    @model_validator(mode="after")
    def _lengths(self) -> "ToyWellFractureConfig":
        for name in ("depth", "productivity_index", "area", "v_crit"):
            value = getattr(self, name)
            if isinstance(value, list) and len(value) != self.n_frac:
                raise ValueError(f"{name} has {len(value)} entries, expected n_frac={self.n_frac}")
        return self

    def build(self) -> ToyWellFractureProblem:
        v_crit = self.v_crit
        if isinstance(v_crit, LinearRange):
            v_crit = np.linspace(v_crit.lo, v_crit.hi, self.n_frac)
        return ToyWellFractureProblem(
            n_frac=self.n_frac,
            depth=self.depth,
            rho=self.rho,
            friction_k=self.friction_k,
            choke_k=self.choke_k,
            p_res=self.p_res,
            productivity_index=self.productivity_index,
            area=self.area,
            v_crit=v_crit,
            schedule=[ScheduleEntry(e.t, e.choke_diam, e.p_whdc) for e in self.schedule],
        )


ProblemConfig = Annotated[
    Union[LinearAffineConfig, OscillatingConfig, ToyWellFractureConfig],
    Field(discriminator="type"),
]


class SolverSettings(_Strict):
    algorithm: Algorithm = Algorithm.TPA
    beta: float = 1.0
    epsilon: float = Field(default=1e-8, gt=0.0)
    n_crit: int = Field(default=1000, ge=1)
    guard_epsilon: float = Field(default=1e-10, gt=0.0)
    zero_norm_floor: float = Field(default=1e-300, ge=0.0)
    beta_clamp: Optional[tuple[float, float]] = None

    _beta = field_validator("beta")(_check_beta)

    def to_solver_config(self, **overrides: Any) -> SolverConfig:
        values = self.model_dump()
        values.update(overrides)
        return SolverConfig(**values)


class ScheduleSettings(_Strict):
    t_start: float = 0.0
    t_end: float
    dt: float = Field(gt=0.0)

    @model_validator(mode="after")
    def _ordered(self) -> "ScheduleSettings":
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        return self

    def to_schedule(self) -> TimestepSchedule:
        return TimestepSchedule(self.t_start, self.t_end, self.dt)


DEFAULT_BETAS = [0.001, 0.01, 0.1, 0.3, 0.5, 0.7, 1.0]


class SweepSettings(_Strict):
    """Grid of runs.  ``problem_grid`` maps problem fields to candidate values;
    the cartesian product of those overrides is applied to the base problem."""

    name: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    algorithms: list[Algorithm] = Field(
        default_factory=lambda: [Algorithm.FPI, Algorithm.ATK, Algorithm.TPA], min_length=1
    )
    betas: list[float] = Field(default_factory=lambda: list(DEFAULT_BETAS), min_length=1)
    problem_grid: dict[str, list[Any]] = Field(default_factory=dict)
    jobs: int = Field(default=1, ge=1)

    @field_validator("betas")
    @classmethod
    def _betas(cls, values: list[float]) -> list[float]:
        for v in values:
            _check_beta(v)
        return values

    @field_validator("problem_grid")
    @classmethod
    def _grid(cls, grid: dict[str, list[Any]]) -> dict[str, list[Any]]:
        for key, values in grid.items():
            if key == "type":
                raise ValueError("the problem type cannot be swept")
            if not values:
                raise ValueError(f"problem_grid.{key} must not be empty")
        return grid


class OutputSettings(_Strict):
    directory: str = "results"
    formats: list[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv", "json"], min_length=1)


class RunConfig(_Strict):
    problem: ProblemConfig
    solver: SolverSettings = Field(default_factory=SolverSettings)
    schedule: ScheduleSettings
    x_init: Optional[list[float]] = None
    sweep: Optional[SweepSettings] = None
    output: OutputSettings = Field(default_factory=OutputSettings)

    @model_validator(mode="after")
    def _problem_grid_applies(self) -> "RunConfig":
        if self.sweep is not None:
            # build every grid point now so bad overrides fail before any run
            self.problem_cases()
        return self

    def problem_cases(self) -> list[tuple[str, dict[str, Any], Any]]:
        """``(case_id, overrides, problem_config)`` for every grid point."""
        grid = self.sweep.problem_grid if self.sweep is not None else {}
        keys = list(grid)
        base = self.problem.model_dump()
        cases = []
        for i, combo in enumerate(itertools.product(*(grid[k] for k in keys))):
            overrides = dict(zip(keys, combo))
            unknown = set(overrides) - set(base)
            if unknown:
                raise ValueError(f"problem_grid key(s) not in problem: {sorted(unknown)}")
            cfg = type(self.problem).model_validate({**base, **overrides})
            cases.append((f"case{i:02d}", overrides, cfg))
        return cases


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        # drop the union-member tag pydantic inserts for discriminated unions
        loc = [str(p) for p in err["loc"] if p not in ("linear_affine", "oscillating", "toy_well_fracture")]
        where = ".".join(loc) or "<root>"
        msg = err["msg"]
        if err["type"] == "extra_forbidden":
            msg = f"unknown key {loc[-1]!r}"
        lines.append(f"{where}: {msg}")
    return "; ".join(lines)


def config_from_dict(data: Any, source: str = "<config>") -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_validation_error(exc)}") from None


def parse_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a JSON run configuration."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data, str(path))


def config_to_dict(config: RunConfig) -> dict[str, Any]:
    return config.model_dump(mode="json")
