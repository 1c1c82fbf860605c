import click
import pandas as pd

from commands.utils import out_path, parse_project, report_errors, write_report
from flm.data import coefficient_frame, load_coefficient, load_dataset, save_coefficient
from flm.hilbert import predict, support
from flm.pipeline import SELECTORS, PipelineOptions, run_pipeline


def fitted_frame(result):
    """Observed and fitted responses on the original scale, one row per observation."""
    data = result.data
    frame = pd.DataFrame({'observed': data.y + data.meta.y_mean,
                          'fitted': predict(result.final.beta, data)})
    if result.debias is not None:
        frame['fitted_debiased'] = predict(result.debias.beta_tilde, data)
    return frame


def write_fit_outputs(settings, result, prefix=''):
    """Coefficients, plot-ready curves and score tables of a pipeline run."""
    coefficients = out_path(settings, f'{prefix}coefficients.csv')
    outputs = [save_coefficient(result.final.beta, coefficients)]
    curves = [coefficient_frame(result.final.beta, result.final.support, estimator='lasso')]
    if result.debias is not None:
        outputs.append(save_coefficient(result.debias.beta_tilde,
                                        out_path(settings, f'{prefix}debiased.csv')))
        curves.append(coefficient_frame(result.debias.beta_tilde, result.final.support,
                                        estimator='debiased'))
    if result.debias_full is not None:
        outputs.append(save_coefficient(result.debias_full.beta_tilde,
                                        out_path(settings, f'{prefix}debiased_full.csv')))
    fitted_path = out_path(settings, f'{prefix}fitted.csv')
    fitted_frame(result).to_csv(fitted_path, index=False)
    outputs.append(fitted_path)
    curve_path = out_path(settings, f'{prefix}coefficient_curves.csv')
    pd.concat(curves, ignore_index=True).to_csv(curve_path, index=False)
    outputs.append(curve_path)
    selection_path = out_path(settings, f'{prefix}selection.csv')
    pd.DataFrame(result.selection.score_table).to_csv(selection_path, index=False)
    outputs.append(selection_path)
    if result.dimension is not None:
        dimension_path = out_path(settings, f'{prefix}dimension.csv')
        pd.DataFrame(result.dimension.score_table).to_csv(dimension_path, index=False)
        outputs.append(dimension_path)
    return outputs


def fit_metrics(result):
    metrics = dict(result.metrics)
    metrics['fit'] = result.final.to_dict()
    metrics['selection'] = result.selection.to_dict()
    if result.dimension is not None:
        metrics['dimension'] = result.dimension.to_dict()
    if result.debias is not None:
        metrics['debias'] = result.debias.to_dict()
    if result.debias_full is not None:
        metrics['debias_full'] = result.debias_full.to_dict()
    return metrics


@click.command('fit')
@click.option('--data', 'manifest', type=click.Path(dir_okay=False), required=True,
              help='Dataset manifest (.json).')
@click.option('--select', type=click.Choice(SELECTORS), default='sigma', show_default=True)
@click.option('--project', callback=parse_project, default=None,
              help="'auto' selects m by the penalised criterion; an integer fixes it.")
@click.option('--kappa', type=float, default=None, help='Dimension penalty constant.')
@click.option('--debias/--no-debias', default=False, help='Tikhonov refit on the support.')
@click.option('--debias-full', is_flag=True, help='Tikhonov fit on every block (untuned).')
@click.option('--exact-r', is_flag=True, help='Refit at the plug-in r instead of the grid.')
@click.option('--truth', type=click.Path(dir_okay=False), default=None,
              help='True coefficient (.csv) for error metrics.')
@click.pass_obj
@report_errors
def fit_cmd(settings, manifest, select, project, kappa, debias, debias_full, exact_r, truth):
    """Run path, choice of r and the optional projection and Tikhonov steps."""
    raw = load_dataset(manifest)
    true_pair = None
    if truth is not None:
        beta_star = load_coefficient(truth, raw.space)
        true_pair = (beta_star, support(beta_star))
    overrides = {'select': select, 'project': project, 'debias': debias,
                 'debias_full': debias_full, 'exact_r': exact_r}
    if kappa is not None:
        overrides['kappa_pen'] = kappa
    options = PipelineOptions.from_config(settings, **overrides)
    result = run_pipeline(raw, options, truth=true_pair)
    outputs = write_fit_outputs(settings, result)
    write_report(
        settings, 'fit', seed=settings.SEED, timings=result.timings, outputs=outputs,
        flags={'data': manifest, 'truth': truth, **overrides, 'kappa_pen': options.kappa_pen},
        metrics=fit_metrics(result),
    )
    names = ', '.join(result.metrics['support_names'])
    click.echo(f"support: {result.metrics['support']} ({names})")
    for key in ('debias', 'debias_full'):
        refit = getattr(result, key)
        if refit is not None and not refit.converged:
            click.echo(f"warning: {key.replace('_', ' ')} recursion stopped after "
                       f"{refit.n_steps} steps without converging", err=True)
