"""Command-line benchmark harness.

Subcommands: ``run`` (execute a solver/batch/seed experiment grid),
``gen`` (write a generated payoff matrix), ``verify`` (problem invariant
checks), ``summarize`` (operations-to-target tables from traces),
``plotdata`` (two-column gap-vs-ops files for external plotting tools).

Configuration is an INI file (sections ``[problem]``, ``[run]``, and
optional ``[solver.<name>]`` overrides); command-line flags win over the
config.  The README documents the full schema.  Exit codes: 0 success,
1 solver divergence (or failed verification), 2 configuration error,
3 I/O error.  The environment variable ``VIBENCH_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

from .core import CheckResult, SolverParams, tune_params, verify_problem
from .metrics import game_duality_gap, gap_lower_witness, slope_estimate
from .problems import (GeneratorSpec, MatrixGame, component_lipschitz,
                       generate_matrix, load_matrix, save_matrix)
from .rng import SplitMix64, derive_stream_seed
from .solvers import (DivergenceError, StopCriteria, default_eg_eta,
                      default_popov_eta, get_solver)
from .trace import RunTrace

log = logging.getLogger("vibench")

EXIT_OK = 0
EXIT_DIVERGED = 1
EXIT_CONFIG = 2
EXIT_IO = 3

GAP_FLOOR = 1e-300


class ConfigError(ValueError):
    pass


def _init_logging() -> None:
    level_name = os.environ.get("VIBENCH_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(tok) for tok in str(text).split(",") if tok.strip() != ""]
    except ValueError:
        raise ConfigError(f"{what}: expected a comma-separated integer list, got {text!r}")


def _normalize_kind(kind: str) -> str:
    return kind.strip().lower().replace("-", "_")


@dataclass
class ProblemSpec:
    """Problem source: a generator spec or a matrix file path."""

    kind: str
    dim: int = 0
    seed: int = 0
    theta: float = 0.8
    path: str = ""

    def build(self) -> MatrixGame:
        if self.kind == "file":
            return MatrixGame(load_matrix(self.path))
        spec = GeneratorSpec(kind=self.kind, dim=self.dim, seed=self.seed,
                             theta=self.theta)
        return MatrixGame(generate_matrix(spec))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "seed": self.seed,
                "theta": self.theta, "path": self.path}

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        return cls(**d)


@dataclass
class ExperimentConfig:
    problem: ProblemSpec
    solvers: list[str]
    batches: list[int]
    seeds: list[int]
    eps: Optional[float]
    max_ops: Optional[float]
    max_iters: int
    cadence: int
    out: str
    jobs: int
    solver_overrides: dict

    def validate(self) -> None:
        if not self.solvers:
            raise ConfigError("run.solvers: at least one solver is required")
        if not self.seeds:
            raise ConfigError("run.seeds: at least one seed is required")
        if not self.batches:
            raise ConfigError("run.batches: at least one batch size is required")
        if any(b < 1 for b in self.batches):
            raise ConfigError("run.batches: batch sizes must be positive")
        has_budget = self.max_ops is not None or self.max_iters < 2 ** 62
        if self.eps is None and not has_budget:
            raise ConfigError("run: either eps or a finite budget is required")
        if self.eps is not None and not self.eps > 0:
            raise ConfigError("run.eps: target gap must be positive")
        if self.cadence < 1:
            raise ConfigError("run.cadence: must be >= 1")
        if self.jobs < 1:
            raise ConfigError("run.jobs: must be >= 1")
        if not self.out:
            raise ConfigError("run.out: output directory is required")


def _read_config(path: Optional[str]) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    if path:
        read = parser.read(path)
        if not read:
            raise OSError(f"config file not found: {path}")
    return parser


def _build_experiment(args) -> ExperimentConfig:
    cfg = _read_config(args.config)
    prob = dict(cfg.items("problem")) if cfg.has_section("problem") else {}
    run = dict(cfg.items("run")) if cfg.has_section("run") else {}

    def _pick(flag_val, cfg_val):
        return flag_val if flag_val is not None else cfg_val

    kind = _normalize_kind(_pick(args.kind, prob.get("kind", "policeman_burglar")))
    if args.matrix:
        kind = "file"
    try:
        spec = ProblemSpec(
            kind=kind,
            dim=int(_pick(args.dim, prob.get("dim", 50))),
            seed=int(prob.get("seed", 0)),
            theta=float(prob.get("theta", 0.8)),
            path=args.matrix or prob.get("path", ""),
        )
    except ValueError as exc:
        raise ConfigError(f"problem: {exc}")
    if spec.kind == "file" and not spec.path:
        raise ConfigError("problem: kind 'file' requires a matrix path")

    solvers_text = _pick(args.solver, run.get("solvers", "ommb"))
    solvers = [s.strip() for s in solvers_text.split(",") if s.strip()]
    batches = _parse_int_list(_pick(args.batch, run.get("batches", "1")),
                              "run.batches")
    seeds = _parse_int_list(_pick(args.seed, run.get("seeds", "0")), "run.seeds")

    def _opt_float(flag_val, key):
        raw = flag_val if flag_val is not None else run.get(key)
        if raw in (None, ""):
            return None
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"run.{key}: expected a number, got {raw!r}")

    eps = _opt_float(args.eps, "eps")
    max_ops = _opt_float(args.max_ops, "max_ops")
    try:
        max_iters = int(_pick(args.max_iters, run.get("max_iters", 100_000)))
        cadence = int(_pick(args.cadence, run.get("cadence", 100)))
        jobs = int(_pick(args.jobs, run.get("jobs", 1)))
    except ValueError as exc:
        raise ConfigError(f"run: {exc}")
    out = _pick(args.out, run.get("out", ""))

    overrides = {}
    for section in cfg.sections():
        if section.startswith("solver."):
            overrides[section[len("solver."):]] = dict(cfg.items(section))

    exp = ExperimentConfig(spec, solvers, batches, seeds, eps, max_ops,
                           max_iters, cadence, out, jobs, overrides)
    exp.validate()
    for name in exp.solvers:
        get_solver(name)  # unknown solver -> error before any run
    return exp


def _solver_params(solver: str, game: MatrixGame, batch: int, stream_seed: int,
                   overrides: dict, max_iters: int) -> SolverParams:
    """Per-run parameters: manual overrides win over automatic tuning."""
    over = overrides.get(solver, {})
    lip = game.lipschitz
    problem = game.problem()

    def _f(key):
        return float(over[key]) if key in over else None

    if solver == "ommb":
        eta, gamma, prob = _f("eta"), _f("gamma"), _f("prob")
        if eta is None and gamma is None and prob is None:
            mode = over.get("tuning", "theorem").strip().lower()
            if mode not in ("theorem", "empirical"):
                raise ConfigError(f"solver.ommb.tuning: expected 'theorem' or "
                                  f"'empirical', got {mode!r}")
            return tune_params(lip.l_full, lip.l_bar, batch,
                               num_components=game.num_components,
                               oracle_optimal=True,
                               constant_mode="worst_case" if mode == "theorem"
                               else "empirical",
                               max_iters=max_iters, seed=stream_seed)
        if gamma is None and prob is not None:
            gamma = prob
        if gamma is None:
            gamma = min(batch / game.num_components, 1.0 / 16.0)
        if prob is None:
            prob = gamma
        if eta is None:
            eta = min(math.sqrt(gamma * batch) / (8.0 * lip.l_bar),
                      1.0 / (8.0 * lip.l_full))
        return SolverParams(eta=eta, gamma=gamma, prob=prob, batch=batch,
                            max_iters=max_iters, seed=stream_seed)
    if solver == "eg":
        eta = _f("eta")
        eta = default_eg_eta(problem) if eta is None else eta
    elif solver == "popov":
        eta = _f("eta")
        eta = default_popov_eta(problem) if eta is None else eta
    else:
        eta = _f("eta")
        if eta is None:
            raise ConfigError(f"solver.{solver}: registered solvers without "
                              f"built-in tuning need an explicit eta")
    return SolverParams(eta=eta, gamma=0.0, prob=1.0, batch=batch,
                        max_iters=max_iters, seed=stream_seed)


def _execute_run(task: dict) -> dict:
    """Worker body: build the problem, run, write the trace CSV."""
    spec = ProblemSpec.from_dict(task["problem"])
    game = spec.build()
    problem = game.problem()
    entry = get_solver(task["solver"])
    params = SolverParams(**task["params"])
    stop = StopCriteria(target_gap=task["eps"], max_ops=task["max_ops"])
    result = {
        "file": task["filename"],
        "solver": task["solver"],
        "batch": task["batch"],
        "seed": task["config_seed"],
        "run_index": task["run_index"],
        "diverged": False,
    }
    try:
        trace = entry.runner(problem, params, stop, cadence=task["cadence"])
    except DivergenceError as exc:
        result["diverged"] = True
        result["error"] = str(exc)
        return result
    trace.metadata["config_seed"] = task["config_seed"]
    trace.metadata["run_index"] = task["run_index"]
    trace.write_csv(os.path.join(task["out"], task["filename"]))
    final = trace.rows[-1] if trace.rows else None
    result.update({
        "iterations": final.iteration if final else 0,
        "matvec_ops": final.matvec_ops if final else 0.0,
        "gap_avg": final.gap_avg if final else float("nan"),
        "gap_last": final.gap_last if final else float("nan"),
        "refreshes": trace.metadata.get("refreshes", 0),
        "reached_target": bool(task["eps"] is not None and final is not None
                               and final.gap_avg <= task["eps"]),
    })
    return result


def cmd_run(args) -> int:
    exp = _build_experiment(args)
    if os.path.exists(exp.out):
        if not args.force:
            print(f"error: output directory {exp.out!r} already exists "
                  f"(use --force to overwrite)", file=sys.stderr)
            return EXIT_IO
    else:
        os.makedirs(exp.out)

    game = exp.problem.build()
    tasks = []
    run_index = 0
    for solver in exp.solvers:
        entry = get_solver(solver)
        solver_batches = exp.batches if entry.uses_batch else [1]
        for batch in solver_batches:
            for seed in exp.seeds:
                stream_seed = derive_stream_seed(seed, run_index)
                params = _solver_params(solver, game, batch, stream_seed,
                                        exp.solver_overrides, exp.max_iters)
                tasks.append({
                    "problem": exp.problem.to_dict(),
                    "solver": solver,
                    "batch": batch,
                    "config_seed": seed,
                    "run_index": run_index,
                    "params": {
                        "eta": params.eta, "gamma": params.gamma,
                        "prob": params.prob, "batch": params.batch,
                        "max_iters": params.max_iters,
                        "op_budget": params.op_budget,
                        "seed": params.seed, "warnings": params.warnings,
                    },
                    "eps": exp.eps,
                    "max_ops": exp.max_ops,
                    "cadence": exp.cadence,
                    "out": exp.out,
                    "filename": f"{solver}_b{batch}_s{seed}.csv",
                })
                run_index += 1

    log.info("running %d tasks with %d worker(s)", len(tasks), exp.jobs)
    if exp.jobs == 1:
        results = [_execute_run(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=exp.jobs) as pool:
            results = list(pool.map(_execute_run, tasks))

    summary = {
        "problem": exp.problem.to_dict(),
        "eps": exp.eps,
        "max_ops": exp.max_ops,
        "max_iters": exp.max_iters,
        "cadence": exp.cadence,
        "runs": results,
    }
    with open(os.path.join(exp.out, "summary.json"), "w", encoding="ascii") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    diverged = [r for r in results if r["diverged"]]
    for r in diverged:
        print(f"run {r['file']} diverged: {r.get('error', '')}", file=sys.stderr)
    print(f"completed {len(results) - len(diverged)}/{len(results)} runs "
          f"-> {exp.out}")
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_gen(args) -> int:
    kind = _normalize_kind(args.kind)
    spec = GeneratorSpec(kind=kind, dim=args.dim, seed=args.seed,
                         theta=args.theta)
    A = generate_matrix(spec)
    save_matrix(A, args.out)
    game = MatrixGame(A)
    lip = component_lipschitz(game)
    print(f"dim={game.dim} sigma_max={lip.l_full:.10g} l_bar={lip.l_bar:.10g} "
          f"-> {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.matrix:
        game = MatrixGame(load_matrix(args.matrix))
    else:
        spec = GeneratorSpec(kind=_normalize_kind(args.kind), dim=args.dim,
                             seed=args.seed, theta=args.theta)
        game = MatrixGame(generate_matrix(spec))
    lip = game.lipschitz
    if args.debug_scale_lipschitz != 1.0:
        scale = args.debug_scale_lipschitz
        lip = type(lip)(l_full=lip.l_full * scale,
                        per_component=tuple(c * scale for c in lip.per_component),
                        l_bar=lip.l_bar * scale)
    problem = game.problem()
    if lip is not game.lipschitz:
        problem = replace(problem, lipschitz=lip)

    report = verify_problem(problem, probes=args.probes, rng_seed=args.seed)

    # metric consistency: closed-form gap vs the attaining-vertex value
    stream = SplitMix64(args.seed ^ 0xC0FFEE)
    worst = 0.0
    nonneg_ok = True
    for _ in range(10):
        z = problem.prox.prox_map(1.0, stream.normals(problem.dim))
        gap = game_duality_gap(game, z)
        _, witness = gap_lower_witness(game, z)
        worst = max(worst, abs(gap - witness))
        nonneg_ok = nonneg_ok and gap >= -1e-10
    report.checks.append(CheckResult(
        "gap-consistency", worst <= 1e-12 and nonneg_ok, worst,
        "closed-form duality gap vs attaining vertex pair"))

    if lip.l_full == 0.0:
        print("note: zero matrix, all Lipschitz constants are 0")
    print(report)
    return EXIT_OK if report.passed else EXIT_DIVERGED


def _ops_to_target(rows, eps: float) -> Optional[float]:
    """Matvec ops at the first gap crossing, log-interpolated between rows."""
    prev = None
    for row in rows:
        gap = row.gap_avg
        if not math.isfinite(gap):
            prev = None
            continue
        if gap <= eps:
            if prev is None:
                return row.matvec_ops
            g0 = max(prev.gap_avg, GAP_FLOOR)
            g1 = max(gap, GAP_FLOOR)
            if g0 <= eps or g0 <= g1:
                return row.matvec_ops
            t = (math.log(g0) - math.log(eps)) / (math.log(g0) - math.log(g1))
            return prev.matvec_ops + t * (row.matvec_ops - prev.matvec_ops)
        prev = row
    return None


def cmd_summarize(args) -> int:
    rows_out = []
    groups: dict[tuple[str, str], list[dict]] = {}
    for path in args.traces:
        trace = RunTrace.read_csv(path)
        if not trace.rows:
            raise ValueError(f"{path}: trace has no data rows")
        meta = trace.metadata
        final = trace.rows[-1]
        ops = _ops_to_target(trace.rows, args.eps)
        last_iter = final.iteration
        try:
            slope = slope_estimate(trace, (last_iter / 10.0, last_iter))
        except ValueError:
            slope = None
        budget = final.matvec_ops
        entry = {
            "file": os.path.basename(path),
            "solver": meta.get("solver", "?"),
            "batch": meta.get("batch", "?"),
            "seed": meta.get("seed", "?"),
            "ops_to_target": ops,
            "final_gap": final.gap_avg,
            "slope": slope,
            "budget": budget,
        }
        rows_out.append(entry)
        groups.setdefault((entry["solver"], str(entry["batch"])), []).append(entry)

    header = (f"{'file':<28} {'solver':<8} {'b':>4} {'seed':>6} "
              f"{'ops->eps':>12} {'final gap':>12} {'slope':>8}")
    print(header)
    print("-" * len(header))
    for e in rows_out:
        ops_text = (f"{e['ops_to_target']:.6g}" if e["ops_to_target"] is not None
                    else f"not reached (budget {e['budget']:.6g})")
        slope_text = f"{e['slope']:.3f}" if e["slope"] is not None else "n/a"
        print(f"{e['file']:<28} {e['solver']:<8} {e['batch']:>4} {e['seed']:>6} "
              f"{ops_text:>12} {e['final_gap']:>12.6g} {slope_text:>8}")

    aggregates = {}
    print()
    print(f"{'solver':<8} {'b':>4} {'reached':>8} {'min ops':>12} "
          f"{'median ops':>12} {'max ops':>12}")
    for (solver, batch), entries in sorted(groups.items()):
        reached = sorted(e["ops_to_target"] for e in entries
                         if e["ops_to_target"] is not None)
        key = f"{solver}_b{batch}"
        if reached:
            agg = {"min": reached[0],
                   "median": reached[len(reached) // 2] if len(reached) % 2
                   else 0.5 * (reached[len(reached) // 2 - 1]
                               + reached[len(reached) // 2]),
                   "max": reached[-1],
                   "reached": len(reached), "total": len(entries)}
            print(f"{solver:<8} {batch:>4} {agg['reached']:>5}/{agg['total']:<2} "
                  f"{agg['min']:>12.6g} {agg['median']:>12.6g} {agg['max']:>12.6g}")
        else:
            agg = {"min": None, "median": None, "max": None,
                   "reached": 0, "total": len(entries)}
            print(f"{solver:<8} {batch:>4} {0:>5}/{len(entries):<2} "
                  f"{'-':>12} {'-':>12} {'-':>12}")
        aggregates[key] = agg

    if args.json:
        payload = {"eps": args.eps, "runs": rows_out, "aggregates": aggregates}
        with open(args.json, "w", encoding="ascii") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    groups: dict[tuple[str, str], list[RunTrace]] = {}
    for path in args.traces:
        trace = RunTrace.read_csv(path)
        key = (trace.metadata.get("solver", "unknown"),
               trace.metadata.get("batch", "0"))
        groups.setdefault(key, []).append(trace)

    written = []
    for (solver, batch), traces in sorted(groups.items()):
        name = f"{solver}_b{batch}.dat"
        with open(os.path.join(args.out, name), "w", encoding="ascii") as fh:
            for t_index, trace in enumerate(traces):
                if t_index:
                    fh.write("\n")
                for row in trace.rows:
                    gap = row.gap_avg if row.gap_avg > GAP_FLOOR else GAP_FLOOR
                    fh.write(f"{row.matvec_ops:.10g} {gap:.10g}\n")
        written.append(name)
    print(f"wrote {len(written)} data file(s) to {args.out}: {', '.join(written)}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vibench",
        description="Benchmark harness for finite-sum variational "
                    "inequality solvers on bilinear matrix games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment grid")
    p_run.add_argument("--config", help="INI config file")
    p_run.add_argument("--solver", help="comma-separated solver names")
    p_run.add_argument("--dim", type=int, help="problem dimension")
    p_run.add_argument("--batch", help="comma-separated batch sizes")
    p_run.add_argument("--seed", help="comma-separated seeds")
    p_run.add_argument("--eps", type=float, help="target duality gap")
    p_run.add_argument("--max-ops", dest="max_ops", type=float,
                       help="matvec-equivalent operation budget")
    p_run.add_argument("--max-iters", dest="max_iters", type=int,
                       help="iteration cap")
    p_run.add_argument("--cadence", type=int, help="trace row every N iterations")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--jobs", type=int, help="parallel worker count")
    p_run.add_argument("--force", action="store_true",
                       help="allow writing into an existing output directory")
    p_run.add_argument("--kind", help="generator kind for the problem")
    p_run.add_argument("--matrix", help="path to a matrix file problem")
    p_run.set_defaults(func=cmd_run)

    p_gen = sub.add_parser("gen", help="generate and save a payoff matrix")
    p_gen.add_argument("--kind", required=True,
                       help="policeman-burglar | uniform-grid | seeded-gaussian")
    p_gen.add_argument("--dim", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--theta", type=float, default=0.8)
    p_gen.add_argument("out", help="output matrix file")
    p_gen.set_defaults(func=cmd_gen)

    p_ver = sub.add_parser("verify", help="check problem invariants")
    p_ver.add_argument("--matrix", help="path to a matrix file")
    p_ver.add_argument("--kind", default="policeman_burglar")
    p_ver.add_argument("--dim", type=int, default=50)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--theta", type=float, default=0.8)
    p_ver.add_argument("--probes", type=int, default=20)
    p_ver.add_argument("--debug-scale-lipschitz", dest="debug_scale_lipschitz",
                       type=float, default=1.0,
                       help="testing aid: scale declared constants before checking")
    p_ver.set_defaults(func=cmd_verify)

    p_sum = sub.add_parser("summarize", help="ops-to-target table from traces")
    p_sum.add_argument("--eps", type=float, required=True)
    p_sum.add_argument("--json", help="also write the summary as JSON")
    p_sum.add_argument("traces", nargs="+")
    p_sum.set_defaults(func=cmd_summarize)

    p_plot = sub.add_parser("plotdata", help="emit (ops, gap) data files")
    p_plot.add_argument("--out", required=True, help="output directory")
    p_plot.add_argument("traces", nargs="+")
    p_plot.set_defaults(func=cmd_plotdata)

    return parser


def main(argv=None) -> int:
    _init_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
