import json

import click

from experiments.runner import ExperimentSpec, build_cell, run_config_for
from lcpg.drivers import lcpg_run
from lcpg.problem import evaluate_constraints
import export_helper


@click.command('solve')
@click.argument('problem_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--method', default='lcpg', show_default=True,
              help='lcpg, lcpg-inexact, lcpg-convex, lcpg-strongly-convex, lcspg or lcsvrg')
@click.option('--subsolver', type=click.Choice(['ipm', 'pd', 'scad']), default=None)
@click.option('--K', 'K', type=int, default=None, help='Outer iterations (default DEFAULT_K)')
@click.option('--seed', type=int, default=None, help='Seed (default DEFAULT_SEED)')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Trace CSV path')
@click.option('--timing', is_flag=True, help='Record per-iteration time_ms in the trace')
@click.pass_obj
def solve_cmd(app_config, problem_file, method, subsolver, K, seed, out, timing):
    """Solve one generated problem described by a JSON file"""
    try:
        with open(problem_file, 'r', encoding='utf-8') as handle:
            data = json.load(handle)
        seed = app_config.DEFAULT_SEED if seed is None else seed
        data = dict(data, methods=[method], seeds=[seed])
        if K is not None:
            data['K'] = K
        spec = ExperimentSpec.from_dict(data)
        cell = build_cell(spec, seed)
        run_config = run_config_for(spec, method, seed, cell, app_config, subsolver=subsolver)
        if timing:
            run_config = run_config.replace(record_time=True)

        result = lcpg_run(cell.problem, run_config)
        trace_path = None
        if out:
            trace_path = export_helper.output_path(out, app_config.OUTPUT_FOLDER)
            export_helper.write_trace(result, trace_path)

        psi = evaluate_constraints(cell.problem, result.x_final)
        feasible = bool((psi <= cell.problem.eta + run_config.feas_tol).all())
        click.echo(f"{'✅' if feasible else '⚠️'} {method} finished: K={run_config.K} "
                   f"objective={result.obj_final:.6e}", err=True)
        kkt = result.kkt
        click.echo(json.dumps({
            "status": "success",
            "data": {
                "method": method,
                "subsolver": run_config.subsolver.value,
                "K": run_config.K,
                "seed": seed,
                "n": cell.problem.d,
                "m": cell.problem.m,
                "objective": result.obj_final,
                "feasible": feasible,
                "final_dual_norm": result.final_dual_norm,
                "max_dual_norm": result.max_dual_norm,
                "effective_passes": result.effective_passes(cell.n_components),
                "khat": result.khat,
                "kkt": {
                    "type": kkt.kind.value,
                    "stationarity": kkt.stationarity,
                    "exact_residual": kkt.exact,
                    "complementarity": kkt.complementarity,
                    "feasibility": kkt.feasibility,
                    "distance_bound": kkt.distance_bound,
                },
                "trace": trace_path,
            },
            "message": "Problem solved successfully"
        }, indent=2))

    except Exception as e:
        click.echo(json.dumps({"status": "error", "message": str(e)}))
        click.echo(f"❌ solve failed: {e}", err=True)
        raise SystemExit(1)
