"""Experiment grids: (method x seed) cells on generated problems, with CSV outputs."""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from tqdm import tqdm

import export_helper
from lcpg.drivers import RunConfig, RunMode, RunResult, Subsolver, TRACE_FIELDS, lcpg_run
from lcpg.errors import ConfigError, LcpgError, RunAbortedError
from lcpg.problem import ConstrainedProblem, evaluate_constraints, within_levels

from experiments.datasets import load_sparse_dataset, synthetic_classification
from experiments.generators import QcqpRecipe, ScadRecipe, build_scad_problem, gen_qcqp

logger = logging.getLogger(__name__)

# method name -> (mode, subsolver or None for the problem family default)
METHODS: Dict[str, Tuple[RunMode, Optional[Subsolver]]] = {
    "lcpg": (RunMode.EXACT, None),
    "lcpg-ipm": (RunMode.EXACT, Subsolver.IPM),
    "lcpg-pd": (RunMode.EXACT, Subsolver.FIRSTORDER),
    "lcpg-inexact": (RunMode.INEXACT, None),
    "lcpg-convex": (RunMode.CONVEX, None),
    "lcpg-strongly-convex": (RunMode.STRONGLY_CONVEX, None),
    "lcspg": (RunMode.STOCHASTIC, None),
    "lcsvrg": (RunMode.SVRG, None),
}

PROBLEM_KINDS = ("qcqp", "scad")

RESULT_FIELDS = ("experiment_id", "seed", "n", "m", "method", "status", "final_objective",
                 "final_dual_norm", "max_dual_norm", "wall_time", "effective_passes",
                 "feasible", "message")


@dataclass(frozen=True)
class ExperimentSpec:
    experiment_id: str
    problem: str
    methods: Tuple[str, ...]
    seeds: Tuple[int, ...] = (0,)
    K: Optional[int] = None
    qcqp: Mapping[str, Any] = field(default_factory=dict)
    scad: Mapping[str, Any] = field(default_factory=dict)
    dataset: Optional[str] = None
    positive_class: Optional[str] = None
    n_samples: int = 200
    n_features: int = 50
    run: Mapping[str, Any] = field(default_factory=dict)
    workers: Optional[int] = None

    def __post_init__(self):
        if self.problem not in PROBLEM_KINDS:
            raise ConfigError(f"problem must be one of {PROBLEM_KINDS}, got {self.problem!r}")
        methods = tuple(self.methods)
        if not methods:
            raise ConfigError("an experiment needs at least one method")
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods: {', '.join(unknown)}")
        seeds = tuple(range(self.seeds)) if isinstance(self.seeds, int) else tuple(self.seeds)
        if not seeds:
            raise ConfigError("an experiment needs at least one seed")
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "seeds", seeds)
        # fail early on bad recipe keys
        QcqpRecipe.from_dict(self.qcqp)
        ScadRecipe.from_dict(self.scad)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], problem: Optional[str] = None) -> "ExperimentSpec":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown experiment keys: {', '.join(unknown)}")
        values = dict(data)
        if problem is not None:
            values["problem"] = problem
        values.setdefault("experiment_id", values.get("problem", "experiment"))
        return cls(**values)


@dataclass(frozen=True)
class ResultRow:
    experiment_id: str
    seed: int
    n: int
    m: int
    method: str
    status: str
    final_objective: Optional[float]
    final_dual_norm: Optional[float]
    max_dual_norm: Optional[float]
    wall_time: float
    effective_passes: Optional[float]
    feasible: Optional[bool]
    message: str = ""

    def as_row(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class Cell:
    problem: ConstrainedProblem
    n_components: int
    psi0_lower_bound: Optional[float]
    default_subsolver: Subsolver


def build_cell(spec: ExperimentSpec, seed: int) -> Cell:
    if spec.problem == "qcqp":
        recipe = QcqpRecipe.from_dict({**spec.qcqp, "seed": seed})
        generated = gen_qcqp(recipe)
        return Cell(generated.problem, 0, generated.psi0_lower_bound, Subsolver.IPM)
    if spec.dataset:
        data = load_sparse_dataset(spec.dataset, positive_class=spec.positive_class)
    else:
        data = synthetic_classification(spec.n_samples, spec.n_features, seed=seed)
    problem = build_scad_problem(data, ScadRecipe.from_dict(spec.scad))
    # logistic losses are nonnegative
    return Cell(problem, data.n, 0.0, Subsolver.SCAD)


def run_config_for(spec: ExperimentSpec, method: str, seed: int, cell: Cell,
                   defaults: Any = None, subsolver: Optional[Subsolver] = None) -> RunConfig:
    mode, method_subsolver = METHODS[method]
    values = {**spec.run, "mode": mode, "seed": seed,
              "subsolver": Subsolver(subsolver or method_subsolver or cell.default_subsolver)}
    if spec.K is not None:
        values["K"] = spec.K
    if values["subsolver"] is Subsolver.FIRSTORDER and cell.psi0_lower_bound is not None:
        values.setdefault("psi0_lower_bound", cell.psi0_lower_bound)
    return RunConfig.from_dict(values, defaults)


def run_cell(spec: ExperimentSpec, method: str, seed: int,
             defaults: Any = None) -> Tuple[ResultRow, Optional[RunResult]]:
    """One grid cell; failures become rows with status 'failed' instead of raising."""
    started = time.perf_counter()
    result: Optional[RunResult] = None
    status, message = "ok", ""
    n = m = 0
    try:
        cell = build_cell(spec, seed)
        n, m = cell.problem.d, cell.problem.m
        result = lcpg_run(cell.problem, run_config_for(spec, method, seed, cell, defaults))
    except RunAbortedError as exc:
        status, message, result = "failed", str(exc), exc.result
    except (LcpgError, ValueError) as exc:
        status, message = "failed", str(exc)
    wall = time.perf_counter() - started
    if status == "failed":
        logger.warning("❌ %s/%s seed=%d failed: %s", spec.experiment_id, method, seed, message)

    feasible = passes = None
    if result is not None and status == "ok":
        feasible = within_levels(evaluate_constraints(cell.problem, result.x_final), cell.problem.eta,
                                 result.config.feas_tol)
        passes = result.effective_passes(cell.n_components)
    row = ResultRow(
        experiment_id=spec.experiment_id, seed=seed, n=n, m=m, method=method, status=status,
        final_objective=result.obj_final if result is not None else None,
        final_dual_norm=result.final_dual_norm if result is not None else None,
        max_dual_norm=result.max_dual_norm if result is not None else None,
        wall_time=round(wall, 6), effective_passes=passes, feasible=feasible, message=message,
    )
    return row, result


def trace_filename(spec: ExperimentSpec, method: str, seed: int) -> str:
    return f"{spec.experiment_id}_{method}_seed{seed}_trace.csv"


def run_experiment(spec: ExperimentSpec, out_dir: Optional[str] = None, workers: Optional[int] = None,
                   defaults: Any = None, progress: bool = True):
    """Run every (method, seed) cell; returns rows and run results in grid order."""
    grid = [(method, seed) for method in spec.methods for seed in spec.seeds]
    outcomes: Dict[Tuple[str, int], Tuple[ResultRow, Optional[RunResult]]] = {}
    max_workers = max(1, workers or spec.workers or getattr(defaults, "BENCH_WORKERS", 1))
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {pool.submit(run_cell, spec, method, seed, defaults): (method, seed)
                   for method, seed in grid}
        for future in tqdm(as_completed(futures), total=len(futures), desc=spec.experiment_id,
                           disable=not progress):
            outcomes[futures[future]] = future.result()

    rows = [outcomes[key][0] for key in grid]
    results = {key: outcomes[key][1] for key in grid}
    if out_dir is not None:
        folder = out_dir
        export_helper.write_rows(
            export_helper.output_path(f"{spec.experiment_id}_results.csv", folder),
            RESULT_FIELDS, [r.as_row() for r in rows])
        for (method, seed), result in results.items():
            if result is not None:
                export_helper.write_trace(
                    result, export_helper.output_path(trace_filename(spec, method, seed), folder))
    failed = sum(r.status != "ok" for r in rows)
    logger.info("%s: %d cells, %d failed", spec.experiment_id, len(rows), failed)
    return rows, results


def passes_to_target(result: RunResult, target: float, n: int) -> Optional[float]:
    """Effective passes spent before the objective first reaches ``target``."""
    if n <= 0:
        raise ValueError("n must be positive")
    spent = 0
    for record in result.trace:
        if record.obj <= target:
            return spent / n
        spent = record.grad_evals_stoch
    if result.obj_final <= target:
        return spent / n
    return None


def _series_x(rows: Sequence[Mapping[str, Any]], x_axis: str, n: Optional[int]):
    if x_axis in ("iteration", "iter"):
        return [float(r["k"]) for r in rows]
    if x_axis in ("effective_passes", "passes"):
        if not n:
            raise ConfigError("effective-pass axis needs the number of components n")
        return [float(r["grad_evals_stoch"]) / n for r in rows]
    raise ConfigError(f"unknown x axis {x_axis!r}")


def emit_plotdata(traces: Mapping[str, Sequence[Mapping[str, Any]]], x_axis: str, out_path: str,
                  n: Optional[int] = None) -> int:
    """Write long-format (series, x, y) rows with y the objective; returns the row count."""
    if not traces:
        raise ConfigError("no traces to plot")
    plot_rows: List[Dict[str, Any]] = []
    for label, rows in traces.items():
        rows = list(rows)
        if rows and set(rows[0]) != set(TRACE_FIELDS):
            raise ConfigError(f"trace {label!r} does not have the trace schema")
        xs = _series_x(rows, x_axis, n)
        for x, row in zip(xs, rows):
            plot_rows.append({"series": label, "x": x, "y": float(row["obj"])})
    export_helper.write_rows(out_path, ("series", "x", "y"), plot_rows)
    return len(plot_rows)
