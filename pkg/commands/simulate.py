import click

from commands.utils import out_path, report_errors, write_report
from flm.data import save_coefficient, save_dataset
from flm.simulate import simulate
from models import SimConfig


@click.command('simulate')
@click.option('--example', type=click.IntRange(0, 2), default=1, show_default=True,
              help='0 is the null model, 1 and 2 the sparse truths.')
@click.option('--n', 'n', type=click.IntRange(min=2), default=1000, show_default=True)
@click.option('--sigma', type=click.FloatRange(min=0.0), default=0.01, show_default=True)
@click.option('--name', default=None, help='File stem; defaults to example<k>.')
@click.pass_obj
@report_errors
def simulate_cmd(settings, example, n, sigma, name):
    """Draw a simulated dataset and write it with its true coefficient."""
    sim_config = SimConfig(example=example, n=n, sigma=sigma, grid_size=settings.GRID_SIZE,
                           seed=settings.SEED)
    data, beta, j_star = simulate(sim_config)
    name = name or f'example{example}'
    manifest, payload = save_dataset(data, out_path(settings, f'{name}.json'))
    truth = save_coefficient(beta, out_path(settings, f'{name}_truth.csv'))
    write_report(
        settings, 'simulate', seed=settings.SEED,
        outputs=[manifest, payload, truth],
        flags=sim_config.to_dict(),
        metrics={'n': data.n, 'p': data.p, 'true_support': sorted(j + 1 for j in j_star)},
    )
    click.echo(f"wrote {manifest} (n={data.n}, p={data.p})")
