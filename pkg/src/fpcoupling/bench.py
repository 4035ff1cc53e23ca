"""Parameter sweeps over algorithms and relaxation factors, and their reports."""

from __future__ import annotations

import csv
import enum
import io
import json
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np

from .driver import TimestepSchedule, run_simulation
from .solver import Algorithm, SolverConfig

CSV_COLUMNS = (
    "case_id",
    "problem_params",
    "algorithm",
    "beta",
    "total_iterations",
    "status",
    "diverged_at_step",
    "wall_time_ms",
)


@dataclass
class ProblemCase:
    """One point of the problem grid.

    ``problem`` is any object with a ``build()`` method returning a fresh
    target function; a fresh instance is built for every run because problems
    carry state between timesteps.
    """

    case_id: str
    params: dict[str, Any]
    problem: Any
    x_init: Optional[Sequence[float]] = None

    @property
    def params_json(self) -> str:
        return json.dumps(self.params, sort_keys=True, separators=(",", ":"))


@dataclass
class SweepSpec:
    name: str
    problems: list[ProblemCase]
    algorithms: list[Algorithm]
    betas: list[float]
    schedule: TimestepSchedule
    epsilon: float
    n_crit: int
    guard_epsilon: float = 1e-10
    zero_norm_floor: float = 1e-300
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.problems or not self.algorithms or not self.betas:
            raise ValueError("sweep grids must be non-empty")
        for b in self.betas:
            if not 0.0 < b <= 1.0:
                raise ValueError(f"beta must lie in (0, 1], got {b}")
        self.algorithms = [Algorithm(a) for a in self.algorithms]
        ids = [p.case_id for p in self.problems]
        if len(set(ids)) != len(ids):
            raise ValueError("case ids must be unique")

    def solver_config(self, algorithm: Algorithm, beta: float) -> SolverConfig:
        return SolverConfig(
            algorithm,
            beta,
            self.epsilon,
            self.n_crit,
            guard_epsilon=self.guard_epsilon,
            zero_norm_floor=self.zero_norm_floor,
        )


@dataclass
class CaseResult:
    case_id: str
    problem_params: str
    algorithm: Algorithm
    beta: float
    total_iterations: int
    status: str
    diverged_at_step: Optional[int]
    wall_time_ms: float
    final_state: Optional[list[float]] = field(default=None, repr=False)

    @property
    def completed(self) -> bool:
        return self.status == "Completed"

    def sort_key(self) -> tuple:
        return (self.case_id, self.algorithm.value, self.beta)

    def row(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "problem_params": self.problem_params,
            "algorithm": self.algorithm.value,
            "beta": self.beta,
            "total_iterations": self.total_iterations,
            "status": self.status,
            "diverged_at_step": self.diverged_at_step,
            "wall_time_ms": self.wall_time_ms,
        }


def _run_case(args: tuple[ProblemCase, SweepSpec, Algorithm, float]) -> CaseResult:
    case, spec, algorithm, beta = args
    problem = case.problem.build()
    start = time.perf_counter()
    sim = run_simulation(problem, spec.schedule, spec.solver_config(algorithm, beta), case.x_init)
    wall_ms = (time.perf_counter() - start) * 1e3
    final = sim.final_state
    return CaseResult(
        case.case_id,
        case.params_json,
        algorithm,
        beta,
        sim.total_iterations,
        "Completed" if sim.completed else "Diverged",
        sim.diverged_at_step,
        round(wall_ms, 3),
        None if final is None else [float(v) for v in final],
    )


def run_sweep(spec: SweepSpec) -> list[CaseResult]:
    """Run every (problem, algorithm, beta) cell; diverged cells are kept."""
    tasks = [
        (case, spec, algorithm, beta)
        for case in spec.problems
        for algorithm in spec.algorithms
        for beta in spec.betas
    ]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_run_case, tasks))
    else:
        results = [_run_case(t) for t in tasks]
    return sorted(results, key=CaseResult.sort_key)


# -- acceleration ratios ------------------------------------------------------


class ReferencePolicy(str, enum.Enum):
    BEST_FPI = "BestFPI"
    MATCHED_BETA = "MatchedBeta"


def round_sig(value: float, digits: int = 3) -> float:
    return float(f"{value:.{digits}g}")


@dataclass
class Speedup:
    case_id: str
    algorithm: str
    beta: float
    reference_iterations: Optional[int]
    iterations: Optional[int]
    s: Optional[float]

    @property
    def ratio(self) -> Optional[Fraction]:
        if self.s is None:
            return None
        return Fraction(self.reference_iterations, self.iterations)


@dataclass
class AlgorithmBest:
    beta_opt: Optional[float]
    n_best: Optional[int]
    s_max: Optional[float]


@dataclass
class AccelerationSummary:
    policy: ReferencePolicy
    best: dict[str, dict[str, AlgorithmBest]]
    speedups: list[Speedup]
    averages: list[dict[str, Any]]

    def s_max(self, case_id: str, algorithm: Union[str, Algorithm]) -> Optional[float]:
        return self.best[case_id][Algorithm(algorithm).value].s_max

    def to_dict(self) -> dict[str, Any]:
        return {
            "policy": self.policy.value,
            "best": {
                cid: {alg: asdict(b) for alg, b in sorted(algs.items())}
                for cid, algs in sorted(self.best.items())
            },
            "speedups": [asdict(s) for s in self.speedups],
            "averages": self.averages,
        }


def _best(cells: dict[float, CaseResult]) -> tuple[Optional[float], Optional[int]]:
    done = [(r.total_iterations, -beta) for beta, r in cells.items() if r.completed]
    if not done:
        return None, None
    n, neg_beta = min(done)  # ties go to the larger beta
    return -neg_beta, n


def compute_acceleration(
    results: Iterable[CaseResult],
    reference_beta_policy: Union[str, ReferencePolicy] = ReferencePolicy.BEST_FPI,
) -> AccelerationSummary:
    """Speedups ``S = N(FPI) / N(alg)`` per case.

    ``BestFPI`` divides the best completed FPI run of the case by each cell;
    ``MatchedBeta`` uses the FPI run at the same beta.  ``S`` is ``None``
    wherever the needed reference did not complete.
    """
    policy = ReferencePolicy(reference_beta_policy)
    table: dict[str, dict[str, dict[float, CaseResult]]] = defaultdict(lambda: defaultdict(dict))
    for r in results:
        table[r.case_id][Algorithm(r.algorithm).value][r.beta] = r

    best: dict[str, dict[str, AlgorithmBest]] = {}
    speedups: list[Speedup] = []
    for case_id in sorted(table):
        algs = table[case_id]
        fpi = algs.get(Algorithm.FPI.value, {})
        fpi_beta, fpi_best = _best(fpi)
        best[case_id] = {}
        for alg in sorted(algs):
            beta_opt, n_best = _best(algs[alg])
            s_max = None
            if alg != Algorithm.FPI.value and fpi_best is not None and n_best is not None:
                s_max = round_sig(fpi_best / n_best)
            best[case_id][alg] = AlgorithmBest(beta_opt, n_best, s_max)
            if alg == Algorithm.FPI.value:
                continue
            for beta in sorted(algs[alg]):
                cell = algs[alg][beta]
                if policy is ReferencePolicy.BEST_FPI:
                    ref = fpi_best
                else:
                    ref_cell = fpi.get(beta)
                    ref = ref_cell.total_iterations if ref_cell is not None and ref_cell.completed else None
                n = cell.total_iterations if cell.completed else None
                s = round_sig(ref / n) if ref is not None and n is not None else None
                speedups.append(Speedup(case_id, alg, beta, ref, n, s))

    # arithmetic mean over completed cases for each (algorithm, beta)
    pooled: dict[tuple[str, float], list[int]] = defaultdict(list)
    for algs in table.values():
        for alg, cells in algs.items():
            for beta, cell in cells.items():
                if cell.completed:
                    pooled[(alg, beta)].append(cell.total_iterations)
    averages = [
        {
            "algorithm": alg,
            "beta": beta,
            "mean_iterations": float(np.mean(counts)),
            "completed_cases": len(counts),
        }
        for (alg, beta), counts in sorted(pooled.items())
    ]
    return AccelerationSummary(policy, best, speedups, averages)


# -- reports ------------------------------------------------------------------


def results_to_csv(results: Sequence[CaseResult]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in sorted(results, key=CaseResult.sort_key):
        row = r.row()
        if row["diverged_at_step"] is None:
            row["diverged_at_step"] = ""
        row["beta"] = repr(float(row["beta"]))
        writer.writerow(row)
    return buf.getvalue()


def results_to_json(
    results: Sequence[CaseResult],
    summary: Optional[AccelerationSummary],
    sweep_name: str = "",
    config: Optional[dict[str, Any]] = None,
) -> str:
    doc = {
        "sweep_name": sweep_name,
        "config": config,
        "results": [r.row() for r in sorted(results, key=CaseResult.sort_key)],
        "summary": None if summary is None else summary.to_dict(),
    }
    return json.dumps(doc, indent=2) + "\n"


def emit_report(
    results: Sequence[CaseResult],
    summary: Optional[AccelerationSummary],
    format: str,
    path: Union[str, Path],
    sweep_name: str = "",
    config: Optional[dict[str, Any]] = None,
) -> Path:
    """Write ``results`` as CSV or JSON to ``path``."""
    path = Path(path)
    fmt = format.lower()
    if fmt == "csv":
        text = results_to_csv(results)
    elif fmt == "json":
        text = results_to_json(results, summary, sweep_name, config)
    else:
        raise ValueError(f"unknown report format {format!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror}") from exc
    return path


def report_path(directory: Union[str, Path], sweep_name: str, format: str) -> Path:
    return Path(directory) / f"{sweep_name}_results.{format.lower()}"


def load_results_json(path: Union[str, Path]) -> tuple[list[CaseResult], dict[str, Any]]:
    doc = json.loads(Path(path).read_text())
    results = [
        CaseResult(
            row["case_id"],
            row["problem_params"],
            Algorithm(row["algorithm"]),
            row["beta"],
            row["total_iterations"],
            row["status"],
            row["diverged_at_step"],
            row["wall_time_ms"],
        )
        for row in doc["results"]
    ]
    return results, doc


def format_table(results: Sequence[CaseResult], summary: AccelerationSummary) -> str:
    """Plain-text table per case: rows are algorithms, columns are betas."""
    by_case: dict[str, list[CaseResult]] = defaultdict(list)
    for r in results:
        by_case[r.case_id].append(r)
    blocks = []
    for case_id in sorted(by_case):
        cells = by_case[case_id]
        betas = sorted({r.beta for r in cells})
        algs = sorted({r.algorithm.value for r in cells}, key=lambda a: ("TPA", "ATK", "FPI").index(a))
        header = ["Alg."] + [f"{b:g}" for b in betas] + ["beta_opt", "N_best", "S_max"]
        rows = []
        for alg in algs:
            lookup = {r.beta: r for r in cells if r.algorithm.value == alg}
            row = [alg]
            for b in betas:
                r = lookup.get(b)
                if r is None:
                    row.append("")
                elif r.completed:
                    row.append(f"{r.total_iterations:,}")
                else:
                    row.append(f"div@{r.diverged_at_step}")
            best = summary.best[case_id][alg]
            row.append("---" if best.beta_opt is None else f"{best.beta_opt:g}")
            row.append("---" if best.n_best is None else f"{best.n_best:,}")
            row.append("---" if best.s_max is None else f"{best.s_max:g}")
            rows.append(row)
        widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
        fmt = lambda cols: "  ".join(  # noqa: E731
            c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cols, widths))
        )
        params = cells[0].problem_params
        lines = [f"{case_id} {params}", fmt(header), fmt(["-" * w for w in widths])]
        lines += [fmt(r) for r in rows]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)
