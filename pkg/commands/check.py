import json

import click

from experiments.battery import CHECKS, run_check_battery


@click.command('check')
@click.option('--only', multiple=True, type=click.Choice([name for name, _ in CHECKS]),
              help='Run only the named checks')
def check_cmd(only):
    """Run the invariant battery; exit code 1 if any check fails"""
    try:
        results = run_check_battery(set(only) or None)
        for r in results:
            click.echo(f"{'✅' if r.passed else '❌'} {r.name}: {r.detail}", err=True)
        passed = all(r.passed for r in results)
        click.echo(json.dumps({
            "status": "success" if passed else "failed",
            "data": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results],
            "message": f"{sum(r.passed for r in results)}/{len(results)} checks passed"
        }, indent=2))

    except Exception as e:
        click.echo(json.dumps({"status": "error", "message": str(e)}))
        raise SystemExit(1)

    if not passed:
        raise SystemExit(1)
