import json

import click

from experiments.runner import ExperimentSpec, run_experiment


@click.command('bench')
@click.argument('problem', type=click.Choice(['qcqp', 'scad']))
@click.argument('spec_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--workers', type=int, default=None, help='Concurrent grid cells (default BENCH_WORKERS)')
@click.option('--out-dir', type=click.Path(file_okay=False), default=None,
              help='Folder for result and trace CSVs (default OUTPUT_FOLDER)')
@click.option('--quiet', is_flag=True, help='Hide the progress bar')
@click.pass_obj
def bench_cmd(app_config, problem, spec_file, workers, out_dir, quiet):
    """Run a (method x seed) benchmark grid"""
    try:
        with open(spec_file, 'r', encoding='utf-8') as handle:
            spec = ExperimentSpec.from_dict(json.load(handle), problem=problem)

        folder = out_dir or app_config.OUTPUT_FOLDER
        rows, _ = run_experiment(spec, out_dir=folder, workers=workers, defaults=app_config,
                                 progress=not quiet)
        failed = [r for r in rows if r.status != 'ok']
        infeasible = [r for r in rows if r.feasible is False]
        if failed or infeasible:
            click.echo(f"⚠️ {len(failed)} failed and {len(infeasible)} infeasible of {len(rows)} runs",
                       err=True)
        else:
            click.echo(f"✅ {len(rows)} runs finished", err=True)

        click.echo(json.dumps({
            "status": "success",
            "data": {
                "experiment_id": spec.experiment_id,
                "runs": len(rows),
                "failed": len(failed),
                "infeasible": len(infeasible),
                "results": f"{folder}/{spec.experiment_id}_results.csv",
                "summary": [
                    {
                        "method": r.method,
                        "seed": r.seed,
                        "status": r.status,
                        "final_objective": r.final_objective,
                        "max_dual_norm": r.max_dual_norm,
                    }
                    for r in rows
                ]
            },
            "message": "Benchmark completed"
        }, indent=2))

    except Exception as e:
        click.echo(json.dumps({"status": "error", "message": str(e)}))
        click.echo(f"❌ bench failed: {e}", err=True)
        raise SystemExit(1)
