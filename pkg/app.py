import logging
import os

import click
from dotenv import load_dotenv

from config import get_config

# Import commands
from commands.solve import solve_cmd
from commands.bench import bench_cmd
from commands.check import check_cmd
from commands.plot import plot_cmd

# Load environment variables
load_dotenv()


@click.group()
@click.option('--env', default=lambda: os.getenv('LCPG_ENV', 'development'), show_default='LCPG_ENV',
              help='Configuration profile: development, production or testing')
@click.pass_context
def cli(ctx, env):
    """Level-constrained proximal gradient solvers and benchmarks"""
    app_config = get_config(env)
    logging.basicConfig(
        level=getattr(logging, str(app_config.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    ctx.obj = app_config


# Register commands
cli.add_command(solve_cmd)
cli.add_command(bench_cmd)
cli.add_command(check_cmd)
cli.add_command(plot_cmd)

if __name__ == '__main__':
    cli()
