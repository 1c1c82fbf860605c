import click
import numpy as np
import pandas as pd

from commands.utils import out_path, parse_project, report_errors, write_report
from flm.pipeline import (
    SELECTORS,
    PipelineOptions,
    default_sim_config,
    recovery_table,
    run_montecarlo,
)
from flm.utils import timed


def replication_frame(records):
    """One row per replication with its scalar and list metrics."""
    rows = []
    for record in records:
        row = {}
        for key, value in record.items():
            if key in ('first_block', 'first_block_debiased', 'traceback', 'timings'):
                continue
            row[key] = ' '.join(str(v) for v in value) if isinstance(value, list) else value
        for phase, seconds in record.get('timings', {}).items():
            row[f'time_{phase}'] = seconds
        rows.append(row)
    return pd.DataFrame(rows)


def dimension_histogram(records):
    chosen = [record['chosen_m'] for record in records if record.get('chosen_m') is not None]
    if not chosen:
        return pd.DataFrame(columns=['m', 'count'])
    values, counts = np.unique(chosen, return_counts=True)
    return pd.DataFrame({'m': values, 'count': counts})


def first_block_frame(records, grid):
    rows = []
    for record in records:
        for label in ('first_block', 'first_block_debiased'):
            if label not in record:
                continue
            estimator = 'debiased' if label.endswith('debiased') else 'lasso'
            for t, value in zip(grid, record[label]):
                rows.append({'rep': record['rep'], 'estimator': estimator, 't': float(t),
                             'value': value})
    return pd.DataFrame(rows, columns=['rep', 'estimator', 't', 'value'])


@click.command('montecarlo')
@click.option('--reps', type=click.IntRange(min=1), default=50, show_default=True)
@click.option('--example', type=click.IntRange(0, 2), default=1, show_default=True)
@click.option('--n', 'n', type=click.IntRange(min=2), default=1000, show_default=True)
@click.option('--sigma', type=click.FloatRange(min=0.0), default=0.01, show_default=True)
@click.option('--select', type=click.Choice(SELECTORS), default='sigma', show_default=True)
@click.option('--project', callback=parse_project, default=None)
@click.option('--debias/--no-debias', default=False)
@click.option('--progress/--no-progress', default=True)
@click.pass_obj
@report_errors
def montecarlo_cmd(settings, reps, example, n, sigma, select, project, debias, progress):
    """Seeded replications of a simulated example with support-recovery rates."""
    sim_config = default_sim_config(settings, example, n, sigma, settings.SEED)
    options = PipelineOptions.from_config(settings, select=select, project=project,
                                          debias=debias)
    timings = {}
    with timed(timings, 'replications'):
        records = run_montecarlo(sim_config, reps, options, settings.THREADS, progress)
    failed = [record['rep'] for record in records if 'error' in record]
    table = recovery_table(records, reps)

    outputs = []
    for name, frame in (
        ('replications.csv', replication_frame(records)),
        ('dimensions.csv', dimension_histogram(records)),
        ('first_block_curves.csv',
         first_block_frame(records, np.linspace(0.0, 1.0, sim_config.grid_size))),
        ('recovery.csv', pd.DataFrame([{'estimator': k, 'percent': v}
                                       for k, v in table.items()])),
    ):
        path = out_path(settings, name)
        frame.to_csv(path, index=False)
        outputs.append(path)
    write_report(
        settings, 'montecarlo', seed=settings.SEED, timings=timings, outputs=outputs,
        flags={**sim_config.to_dict(), 'reps': reps, 'select': select, 'project': project,
               'debias': debias},
        metrics={'recovery_percent': table, 'failed_reps': failed},
    )
    for estimator, percent in table.items():
        click.echo(f"{estimator}: {percent:.1f}% exact support recovery over {reps} replications")
    if failed:
        click.echo(f"{len(failed)} replications failed: {failed}", err=True)
