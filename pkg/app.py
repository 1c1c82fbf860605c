import logging

import click

from commands import register_commands
from config import Config

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


@click.group()
@click.option('--seed', type=int, default=None, help='Root random seed (FLM_SEED).')
@click.option('--threads', type=click.IntRange(min=1), default=None,
              help='Worker count for replications and folds (FLM_THREADS).')
@click.option('--out-dir', type=click.Path(file_okay=False), default=None,
              help='Directory for tables and reports (FLM_OUT_DIR).')
@click.option('--tol', type=click.FloatRange(min=0.0, min_open=True), default=None,
              help='Solver step tolerance (FLM_TOL).')
@click.option('--max-iter', type=click.IntRange(min=1), default=None,
              help='Solver cycle limit (FLM_MAX_ITER).')
@click.option('--verbose', '-v', is_flag=True, help='Log at DEBUG level.')
@click.pass_context
def cli(ctx, seed, threads, out_dir, tol, max_iter, verbose):
    """Group-sparse Lasso for functional linear models."""
    base = ctx.obj or Config
    overrides = {
        'SEED': seed,
        'THREADS': threads,
        'OUT_DIR': out_dir,
        'TOL': tol,
        'MAX_ITER': max_iter,
    }
    overrides = {key: value for key, value in overrides.items() if value is not None}
    if verbose:
        overrides['LOG_LEVEL'] = 'DEBUG'
    settings = type('RunConfig', (base,), overrides)
    logging.basicConfig(level=settings.LOG_LEVEL, format=LOG_FORMAT)
    logging.getLogger().setLevel(settings.LOG_LEVEL)
    ctx.obj = settings


register_commands(cli)

if __name__ == '__main__':
    cli()
