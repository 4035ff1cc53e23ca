"""Command-line entry point: ``fpcoupling {run,sweep,report}``.

Exit codes: 0 success, 1 usage or configuration error, 2 divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bench import (
    ProblemCase,
    SweepSpec,
    compute_acceleration,
    emit_report,
    format_table,
    load_results_json,
    report_path,
    run_sweep,
)
from .config import ConfigError, RunConfig, config_from_dict, config_to_dict, parse_config
from .driver import run_simulation

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DIVERGED = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def sweep_spec_from_config(config: RunConfig) -> SweepSpec:
    if config.sweep is None:
        raise ConfigError("config has no 'sweep' block")
    sweep = config.sweep
    cases = [
        ProblemCase(case_id, {"type": config.problem.type, **overrides}, problem, config.x_init)
        for case_id, overrides, problem in config.problem_cases()
    ]
    return SweepSpec(
        name=sweep.name,
        problems=cases,
        algorithms=list(sweep.algorithms),
        betas=list(sweep.betas),
        schedule=config.schedule.to_schedule(),
        epsilon=config.solver.epsilon,
        n_crit=config.solver.n_crit,
        guard_epsilon=config.solver.guard_epsilon,
        zero_norm_floor=config.solver.zero_norm_floor,
        jobs=sweep.jobs,
    )


def _cmd_run(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    problem = config.problem.build()
    sim = run_simulation(
        problem, config.schedule.to_schedule(), config.solver.to_solver_config(), config.x_init
    )
    counts = sim.iteration_counts()
    print(f"status: {sim.label}")
    print(f"total_iterations: {sim.total_iterations}")
    print(f"steps: {len(counts)}")
    print(f"per_step_max_iterations: {max(counts)}")
    print(f"per_step_mean_iterations: {np.mean(counts):.3f}")
    failures = [(s.index, s.failures) for s in sim.per_step if s.failures]
    if failures:
        print("failures: " + ", ".join(f"step {i}: {f}" for i, f in failures))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        doc = {
            "config": config_to_dict(config),
            "status": sim.label,
            "total_iterations": sim.total_iterations,
            "per_step_iterations": counts,
        }
        (out / "run_result.json").write_text(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK if sim.completed else EXIT_DIVERGED


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    spec = sweep_spec_from_config(config)
    results = run_sweep(spec)
    summary = compute_acceleration(results, args.policy)
    out = Path(args.out) if args.out else Path(config.output.directory)
    for fmt in config.output.formats:
        path = emit_report(
            results, summary, fmt, report_path(out, spec.name, fmt), spec.name, config_to_dict(config)
        )
        print(f"wrote {path}", file=sys.stderr)
    print(format_table(results, summary))
    return EXIT_OK if any(r.completed for r in results) else EXIT_DIVERGED


def _cmd_report(args: argparse.Namespace) -> int:
    source = Path(args.input)
    paths = sorted(source.glob("*_results.json")) if source.is_dir() else [source]
    if not paths:
        raise ConfigError(f"{source}: no *_results.json report found")
    for i, path in enumerate(paths):
        try:
            results, doc = load_results_json(path)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"{path}: unreadable report ({exc})") from None
        summary = compute_acceleration(results, args.policy)
        if i:
            print()
        print(f"# {doc.get('sweep_name') or path.stem}")
        print(format_table(results, summary))
        if args.emit_config:
            if doc.get("config") is None:
                raise ConfigError(f"{path}: report carries no config block")
            config_from_dict(doc["config"], str(path))  # must re-validate
            Path(args.emit_config).write_text(json.dumps(doc["config"], indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fpcoupling", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one simulation")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="directory for run_result.json")
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="run the configured sweep and write reports")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", help="report directory (default: output.directory)")
    sweep.add_argument("--policy", choices=["BestFPI", "MatchedBeta"], default="BestFPI")
    sweep.set_defaults(func=_cmd_sweep)

    report = sub.add_parser("report", help="re-render a JSON sweep report")
    report.add_argument("--in", dest="input", required=True, help="report directory or file")
    report.add_argument("--policy", choices=["BestFPI", "MatchedBeta"], default="BestFPI")
    report.add_argument("--emit-config", help="write the embedded run config to this path")
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_ERROR
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
