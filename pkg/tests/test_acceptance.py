"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also collected into the terminal summary.
"""

import csv
import io
import itertools
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from fpcoupling.bench import compute_acceleration, run_sweep
from fpcoupling.bounds import contraction_bound, nonexpansive_bound
from fpcoupling.cli import sweep_spec_from_config
from fpcoupling.config import parse_config
from fpcoupling.driver import cascade_lengths, mean_iterations, run_simulation
from fpcoupling.problems import LinearAffineProblem
from fpcoupling.solver import (
    Algorithm,
    SolverConfig,
    aitken_relaxation_factor,
    anderson_alpha,
    anderson_step,
    picard_step,
    solve_timestep,
)

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
BASELINE = Path(__file__).resolve().parent / "baselines" / "cascade_table1.json"


class Recording:
    """Wraps a map and keeps every point it was evaluated at."""

    def __init__(self, fn, dimension):
        self.fn = fn
        self.dimension = dimension
        self.points = []

    def evaluate(self, x, t):
        self.points.append(x.copy())
        return self.fn(x)

    def advance_time(self, x, t_old, t_new):
        return []


@pytest.fixture(scope="module")
def cascade():
    cfg = parse_config(CONFIGS / "cascade_table1.json")
    start = time.perf_counter()
    sim = run_simulation(cfg.problem.build(), cfg.schedule.to_schedule(), cfg.solver.to_solver_config())
    results = run_sweep(sweep_spec_from_config(cfg))
    return cfg, sim, results, time.perf_counter() - start


# 1 ---------------------------------------------------------------------------


def test_criterion_01_scalar_affine_exactness(verdict):
    start = time.perf_counter()
    worst = 0.0
    for a, alg, beta in itertools.product((-0.5, 0.3, 0.9), ("ATK", "TPA"), (0.5, 1.0)):
        xs = 1.0 / (1.0 - a)
        p = LinearAffineProblem([[a]], [1.0])
        res = solve_timestep(p, 0.0, [0.0], SolverConfig(alg, beta, 1e-12, 3))
        worst = max(worst, abs(res.x_final[0] - xs) / max(1.0, abs(xs)))

    # plain Picard on a = 0.9: count updates until the same error is met
    rec = Recording(lambda x: 0.9 * x + 1.0, 1)
    solve_timestep(rec, 0.0, [0.0], SolverConfig("FPI", 1.0, 1e-300, 400))
    fpi_needed = next(k for k, x in enumerate(rec.points) if abs(x[0] - 10.0) <= 1e-12 * 10.0)
    floor = math.ceil(math.log(1e-12) / math.log(0.9))

    ok = worst <= 1e-12 and fpi_needed >= floor
    verdict(1, ok, f"max rel err ATK/TPA in 3 evals {worst:.2e}; FPI a=0.9 needs {fpi_needed} >= {floor}",
            time.perf_counter() - start, 1.0)


# 2 ---------------------------------------------------------------------------


def test_criterion_02_contraction_rate(verdict):
    start = time.perf_counter()
    worst = 0.0
    for i in range(20):
        c = (0.3, 0.6, 0.9)[i % 3]
        p = LinearAffineProblem.random(10, c, seed=1000 + i)
        res = solve_timestep(p, 0.0, p.default_initial_guess(), SolverConfig("FPI", 1.0, 1e-13, 2000))
        assert res.converged
        f = [r.residual_norm for r in res.trace]
        worst = max(worst, max(fk / contraction_bound(c, k, f[0]) for k, fk in enumerate(f)))
    verdict(2, worst <= 1 + 1e-9, f"max ||f_k|| / (c^k ||f_0||) = {worst:.12f} over 20 problems",
            time.perf_counter() - start, 5.0)


# 3 ---------------------------------------------------------------------------


def test_criterion_03_nonexpansive_bound(verdict):
    # rotation by 90 degrees after projecting onto a ball: non-expansive, fixed point xs
    xs = np.array([1.0, -2.0, 0.5, 3.0])
    rot = np.kron(np.eye(2), np.array([[0.0, -1.0], [1.0, 0.0]]))

    def g(x):
        d = x - xs
        n = np.linalg.norm(d)
        if n > 1.0:
            d = d / n
        return xs + rot @ d

    start = time.perf_counter()
    worst = 0.0
    checked = 0
    rng = np.random.default_rng(3)
    for beta in (0.25, 0.5, 0.75):
        x0 = xs + 5.0 * rng.standard_normal(4)
        dist0 = float(np.linalg.norm(x0 - xs))
        res = solve_timestep(Recording(g, 4), 0.0, x0, SolverConfig("FPI", beta, 1e-300, 1001))
        running = math.inf
        for k, rec in enumerate(res.trace):
            running = min(running, rec.residual_norm)
            worst = max(worst, running / nonexpansive_bound(dist0, k, beta))
            checked += 1
    verdict(3, worst <= 1.0, f"max min_j||f_j|| / bound = {worst:.3e} over {checked} (beta, k) pairs",
            time.perf_counter() - start, 5.0)


# 4 ---------------------------------------------------------------------------


def test_criterion_04_anderson_alpha_oracle(verdict):
    start = time.perf_counter()
    grid = np.linspace(-10.0, 10.0, 200001)
    rng = np.random.default_rng(4)
    max_gap, max_excess, redraws, pairs = 0.0, -math.inf, 0, 0
    while pairs < 100:
        n = int(rng.integers(1, 9))
        f_prev, f_curr = rng.standard_normal(n), rng.standard_normal(n)
        d = f_curr - f_prev
        objective = (d @ d) * grid**2 + 2.0 * (d @ f_prev) * grid + f_prev @ f_prev
        idx = int(np.argmin(objective))
        if idx in (0, grid.size - 1):
            redraws += 1
            continue
        alpha, guard = anderson_alpha(f_prev, f_curr)
        assert not guard
        max_gap = max(max_gap, abs(alpha - grid[idx]))
        combined = np.linalg.norm(alpha * f_curr + (1.0 - alpha) * f_prev)
        max_excess = max(max_excess, combined - min(np.linalg.norm(f_curr), np.linalg.norm(f_prev)))
        pairs += 1
    ok = max_gap <= 1e-4 and max_excess <= 1e-12
    verdict(4, ok, f"max |alpha - grid argmin| {max_gap:.2e} (<= 1e-4), projection excess {max_excess:.2e}"
            f" ({redraws} edge redraws)", time.perf_counter() - start, 2.0)


# 5 ---------------------------------------------------------------------------


def test_criterion_05_guard_fallback(verdict):
    start = time.perf_counter()
    shift = np.array([0.3, -0.7, 1.1])

    def g(x):
        # residual is shift + 1e-12*tanh(x): consecutive differences stay far below 1e-10
        return x + shift + 1e-12 * np.tanh(x)

    x0 = np.array([0.5, 2.0, -1.0])
    mismatches, guards, steps = 0, 0, 0
    nonzero_diffs = 0
    for alg, beta in itertools.product(("ATK", "TPA"), (0.3, 1.0)):
        rec = Recording(g, 3)
        res = solve_timestep(rec, 0.0, x0, SolverConfig(alg, beta, 1e-14, 40))
        expected = [x0]
        for _ in range(40):
            expected.append(picard_step(expected[-1], g(expected[-1]), beta))
        got = rec.points + [res.x_final]
        mismatches += sum(not np.array_equal(a, b) for a, b in zip(got, expected))
        guards += sum(r.guard_triggered for r in res.trace[1:])
        steps += len(res.trace) - 1
        f = [g(x) - x for x in rec.points]
        nonzero_diffs += sum(np.any(a != b) for a, b in zip(f, f[1:]))

    # the update rules on their own
    f_prev, f_curr = shift, shift + 1e-12
    xp, xc = np.array([1.0, 2.0, 3.0]), np.array([1.5, 2.5, 3.5])
    gp, gc = xp + f_prev, xc + f_curr
    alpha, tpa_guard = anderson_alpha(f_prev, f_curr)
    beta_next, atk_guard = aitken_relaxation_factor(f_prev, f_curr, 0.4)
    rules_ok = (
        tpa_guard and atk_guard and beta_next == 0.4
        and np.array_equal(anderson_step(xp, xc, gp, gc, alpha, 0.4), picard_step(xc, gc, 0.4))
    )
    ok = mismatches == 0 and guards == steps and nonzero_diffs > 0 and rules_ok
    verdict(5, ok, f"{mismatches} bitwise mismatches vs picard_step, guard hit {guards}/{steps} steps",
            time.perf_counter() - start)


# 6 ---------------------------------------------------------------------------


def test_criterion_06_cascade(verdict, cascade):
    cfg, sim, results, elapsed = cascade
    problem = cfg.problem.build()
    chokes = [problem.controls_at(s.t).choke_diam for s in sim.per_step]
    same_choke_cascade = [
        (a.index, b.index)
        for a, b, ca, cb in zip(sim.per_step, sim.per_step[1:], chokes, chokes[1:])
        if a.failures and b.failures and ca == cb
    ]
    summary = compute_acceleration(results, "BestFPI")
    s_tpa, s_atk = summary.s_max("case00", "TPA"), summary.s_max("case00", "ATK")

    baseline = json.loads(BASELINE.read_text())["cells"]
    observed = [
        {"case_id": r.case_id, "algorithm": r.algorithm.value, "beta": r.beta,
         "total_iterations": r.total_iterations, "status": r.status, "diverged_at_step": r.diverged_at_step}
        for r in results
    ]
    drift = sum(a != b for a, b in zip(observed, baseline)) + abs(len(observed) - len(baseline))
    best = {alg: summary.best["case00"][alg].n_best for alg in ("TPA", "ATK", "FPI")}

    checks = {
        "a": bool(same_choke_cascade) and max(cascade_lengths(sim)) >= 2,
        "b": sim.completed,
        "c": s_tpa is not None and s_atk is not None and s_tpa > 1 and s_atk > 1,
        "d": drift == 0 and best["TPA"] <= best["ATK"] <= best["FPI"],
    }
    detail = (
        f"(a) same-choke cascades at steps {same_choke_cascade} "
        f"(b) TPA beta=1 {sim.label} (c) S_max TPA {s_tpa} ATK {s_atk} "
        f"(d) {drift} cells drift from baseline, N_best {best}; "
        + " ".join(f"{k}={'ok' if v else 'no'}" for k, v in checks.items())
    )
    verdict(6, all(checks.values()), detail, elapsed, 60.0)


# 7 ---------------------------------------------------------------------------


def test_criterion_07_timestep_size(verdict):
    start = time.perf_counter()
    coarse_cfg = parse_config(CONFIGS / "oscillating_sweep.json")
    fine_cfg = parse_config(CONFIGS / "oscillating_dt20.json")
    assert coarse_cfg.problem == fine_cfg.problem
    parts, ok = [], True
    for alg in Algorithm:
        runs = [
            run_simulation(c.problem.build(), c.schedule.to_schedule(), c.solver.to_solver_config(algorithm=alg, beta=1.0))
            for c in (fine_cfg, coarse_cfg)
        ]
        fine, coarse = runs
        ok &= fine.completed and coarse.completed
        ok &= mean_iterations(fine) <= mean_iterations(coarse) and len(fine.per_step) > len(coarse.per_step)
        parts.append(f"{alg.value} {mean_iterations(fine):.2f} vs {mean_iterations(coarse):.2f}")
    verdict(7, ok, "mean its/step dt=20 vs dt=150: " + ", ".join(parts), time.perf_counter() - start, 30.0)


# 8 ---------------------------------------------------------------------------


def test_criterion_08_atk_beta0_insensitivity(verdict):
    start = time.perf_counter()
    cfg = parse_config(CONFIGS / "oscillating_sweep.json")
    results = run_sweep(sweep_spec_from_config(cfg))
    elapsed = time.perf_counter() - start

    def spread(counts):
        return (max(counts) - min(counts)) / np.mean(counts)

    ok = all(r.completed for r in results)
    totals = {}
    per_case = []
    for alg in ("ATK", "FPI"):
        cells = [r for r in results if r.algorithm.value == alg]
        by_beta = {b: sum(r.total_iterations for r in cells if r.beta == b) for b in (0.1, 0.5, 1.0)}
        totals[alg] = spread(list(by_beta.values()))
    for case_id in sorted({r.case_id for r in results}):
        s = {
            alg: spread([r.total_iterations for r in results if r.case_id == case_id and r.algorithm.value == alg])
            for alg in ("ATK", "FPI")
        }
        per_case.append(s["ATK"] < s["FPI"])
    ok = ok and totals["ATK"] < totals["FPI"] and all(per_case)
    verdict(8, ok, f"spread over beta0: ATK {totals['ATK']:.4f} vs FPI {totals['FPI']:.4f} "
            f"(ATK smaller in {sum(per_case)}/{len(per_case)} cases)", elapsed, 30.0)


# 9 ---------------------------------------------------------------------------


def test_criterion_09_solver_agreement(verdict, cascade):
    start = time.perf_counter()
    cfg, _, results, _ = cascade
    eps = cfg.solver.epsilon
    done = [r for r in results if r.completed]
    worst, pairs = 0.0, 0
    for a, b in itertools.combinations(done, 2):
        if a.algorithm == b.algorithm:
            continue
        xa, xb = np.array(a.final_state), np.array(b.final_state)
        scale = 2.0 * eps * max(np.linalg.norm(xa), np.linalg.norm(xb))
        worst = max(worst, np.linalg.norm(xa - xb) / scale)
        pairs += 1
    verdict(9, pairs > 0 and worst <= 1.0,
            f"max ||x_a - x_b|| / (2 eps max||x||) = {worst:.3f} over {pairs} cross-algorithm pairs",
            time.perf_counter() - start)


# 10 --------------------------------------------------------------------------


def test_criterion_10_sweep_pipeline(verdict, tmp_path):
    start = time.perf_counter()
    cli = [sys.executable, "-m", "fpcoupling"]

    def sweep(out):
        proc = subprocess.run(
            cli + ["sweep", "--config", str(CONFIGS / "cascade_table1.json"), "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        text = (out / "cascade_table1_results.csv").read_text()
        rows = list(csv.reader(io.StringIO(text)))
        drop = rows[0].index("wall_time_ms")
        return proc.stdout, [r[:drop] + r[drop + 1:] for r in rows]

    table_a, rows_a = sweep(tmp_path / "a")
    _, rows_b = sweep(tmp_path / "b")

    def join(rows):
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        return buf.getvalue().encode()

    report = subprocess.run(cli + ["report", "--in", str(tmp_path / "a")], capture_output=True, text=True)
    n_rows = len(rows_a) - 1
    identical = join(rows_a) == join(rows_b)
    rerendered = report.returncode == 0 and report.stdout.rstrip().endswith(table_a.rstrip())
    ok = n_rows == 21 and identical and rerendered
    verdict(10, ok, f"{n_rows} rows, byte-identical without wall_time: {identical}, report re-renders: {rerendered}",
            time.perf_counter() - start, 90.0)
