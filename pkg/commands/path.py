from dataclasses import replace

import click
import pandas as pd

from commands.utils import out_path, report_errors, write_report
from flm.covariance import pca_basis
from flm.data import load_dataset
from flm.hilbert import prepare
from flm.solver import PathOptions, fit_path
from flm.utils import timed


def path_frame(path, space):
    """Long format: one row per (r, block) with the block norm and the convergence flag."""
    rows = []
    for r, fit, norms in zip(path.grid, path.fits, path.per_r_block_norms):
        for j, norm in enumerate(norms):
            rows.append({'r': float(r), 'block': j + 1, 'name': space.names[j],
                         'norm': float(norm), 'converged': bool(fit.converged)})
    return pd.DataFrame(rows, columns=['r', 'block', 'name', 'norm', 'converged'])


@click.command('path')
@click.option('--data', 'manifest', type=click.Path(dir_okay=False), required=True,
              help='Dataset manifest (.json).')
@click.option('--project', 'm', type=click.IntRange(min=1), default=None,
              help='Fit the projected estimator on the first m basis elements.')
@click.option('--n-r', type=click.IntRange(min=2), default=None)
@click.option('--delta', type=float, default=None)
@click.option('--output', default='path.csv', show_default=True)
@click.pass_obj
@report_errors
def path_cmd(settings, manifest, m, n_r, delta, output):
    """Block norms along the grid of r (data for the norm-versus-r plot)."""
    timings = {}
    data = prepare(load_dataset(manifest))
    options = PathOptions.from_config(settings)
    if delta is not None:
        options = replace(options, delta=delta)
    if n_r is not None:
        options = replace(options, n_r=n_r)
    basis = None
    if m is not None:
        with timed(timings, 'basis'):
            basis = pca_basis(data, settings.TOL_RANK)
    with timed(timings, 'path'):
        path = fit_path(data, options, basis=basis, m=m)
    table = out_path(settings, output)
    path_frame(path, data.space).to_csv(table, index=False)
    write_report(
        settings, 'path', seed=settings.SEED, timings=timings, outputs=[table],
        flags={'data': manifest, 'project': m, 'n_r': options.n_r, 'delta': options.delta},
        metrics=path.to_dict(),
    )
    click.echo(f"wrote {table} ({path.grid.size} values of r, "
               f"{sum(path.converged)} converged)")
