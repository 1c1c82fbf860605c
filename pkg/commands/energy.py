import logging

import click

from commands.fit import fit_metrics, write_fit_outputs
from commands.path import path_frame
from commands.utils import out_path, report_errors, write_report
from flm.data import energy_curves
from flm.pipeline import SELECTORS, PipelineOptions, run_pipeline
from models import EnergyConfig

logger = logging.getLogger(__name__)

REFERENCE_SELECTION = ('Appliances', 'T3', 'T8')


@click.command('energy')
@click.option('--csv', 'raw_csv', type=click.Path(dir_okay=False), default=None,
              help='Raw appliances-energy file; defaults to FLM_ENERGY_CSV.')
@click.option('--select', type=click.Choice(SELECTORS), default='sigma', show_default=True)
@click.option('--debias/--no-debias', default=False)
@click.pass_obj
@report_errors
def energy_cmd(settings, raw_csv, select, debias):
    """Daily-curve regression of next-day log consumption on 24 measured variables."""
    energy_config = EnergyConfig(raw_csv_path=raw_csv or settings.ENERGY_CSV)
    raw = energy_curves(energy_config)
    options = PipelineOptions.from_config(settings, select=select, debias=debias)
    result = run_pipeline(raw, options)
    path_table = out_path(settings, 'energy_path.csv')
    path_frame(result.path, result.data.space).to_csv(path_table, index=False)
    outputs = [path_table] + write_fit_outputs(settings, result, prefix='energy_')

    selected = set(result.metrics['support_names'])
    matches = selected == set(REFERENCE_SELECTION)
    if not matches:
        logger.info("selected %s, reference selection is %s",
                    sorted(selected), list(REFERENCE_SELECTION))
    metrics = fit_metrics(result)
    metrics.update({'n': result.data.n, 'p': result.data.p,
                    'reference_selection': list(REFERENCE_SELECTION),
                    'matches_reference': matches})
    write_report(
        settings, 'energy', seed=settings.SEED, timings=result.timings, outputs=outputs,
        flags={'csv': energy_config.raw_csv_path, 'select': select, 'debias': debias},
        metrics=metrics,
    )
    click.echo(f"n={result.data.n}, p={result.data.p}, selected: "
               f"{', '.join(result.metrics['support_names']) or 'none'}")
