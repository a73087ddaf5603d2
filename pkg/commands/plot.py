import json
import os

import click

from experiments.runner import emit_plotdata
import export_helper


@click.command('plot')
@click.argument('traces', nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--x', 'x_axis', type=click.Choice(['passes', 'iter']), default='iter', show_default=True)
@click.option('--n', 'n_components', type=int, default=None,
              help='Finite-sum size, needed for --x passes')
@click.option('--out', required=True, type=click.Path(dir_okay=False))
@click.pass_obj
def plot_cmd(app_config, traces, x_axis, n_components, out):
    """Merge trace CSVs into long-format (series, x, y) plot data"""
    try:
        series = {}
        for path in traces:
            label = os.path.splitext(os.path.basename(path))[0]
            if label in series:
                raise ValueError(f"duplicate series label {label!r}")
            series[label] = export_helper.read_rows(path)

        target = export_helper.output_path(out, app_config.OUTPUT_FOLDER)
        count = emit_plotdata(series, x_axis, target, n=n_components)
        click.echo(f"✅ wrote {count} points for {len(series)} series", err=True)
        click.echo(json.dumps({
            "status": "success",
            "data": {"out": target, "series": list(series), "rows": count},
            "message": "Plot data written"
        }, indent=2))

    except Exception as e:
        click.echo(json.dumps({"status": "error", "message": str(e)}))
        click.echo(f"❌ plot failed: {e}", err=True)
        raise SystemExit(1)
