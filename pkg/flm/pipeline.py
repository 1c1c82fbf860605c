"""End-to-end estimation: path, choice of r, optional projection and Tikhonov refit."""

import logging
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from tqdm import tqdm

from flm.covariance import pca_basis
from flm.debias import DebiasOptions, default_rho_grid, select_rho_cv, tikhonov_fit
from flm.errors import ParameterError
from flm.hilbert import coefficient_norms, prepare, space_norm
from flm.selection import (
    DimensionOptions,
    estimate_sigma2,
    select_dimension,
    select_r_bic,
    select_r_cv,
    select_r_sigma,
)
from flm.simulate import replicate_seeds, simulate
from flm.solver import PathOptions, fit_path, gpd_fit_projected, penalty_weights
from flm.utils import timed
from models import SimConfig

logger = logging.getLogger(__name__)

SELECTORS = ('cv', 'sigma', 'bic')


@dataclass(frozen=True)
class PipelineOptions:
    select: str = 'sigma'
    project: Optional[object] = None
    debias: bool = False
    debias_full: bool = False
    exact_r: bool = False
    kappa_pen: float = 2.0
    alpha: float = 0.05
    folds: int = 5
    n_jobs: int = 1
    path: PathOptions = field(default_factory=PathOptions)
    dimension: DimensionOptions = field(default_factory=DimensionOptions)
    debias_opts: DebiasOptions = field(default_factory=DebiasOptions)
    rho_grid: tuple = tuple(default_rho_grid())

    @classmethod
    def from_config(cls, config, **overrides):
        path = PathOptions.from_config(config)
        options = cls(
            kappa_pen=config.KAPPA_PEN,
            alpha=config.ALPHA,
            folds=config.CV_FOLDS,
            n_jobs=config.THREADS,
            path=path,
            dimension=DimensionOptions(cap=config.DIM_CAP, tol_rank=config.TOL_RANK,
                                       solver=path.solver),
            debias_opts=DebiasOptions.from_config(config),
            rho_grid=tuple(default_rho_grid(config.RHO_MIN, config.RHO_MAX, config.RHO_N)),
        )
        return replace(options, **overrides)


@dataclass
class PipelineResult:
    data: object
    path: object
    selection: object
    lasso: object
    projected: Optional[object] = None
    dimension: Optional[object] = None
    debias: Optional[object] = None
    debias_full: Optional[object] = None
    timings: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.projected if self.projected is not None else self.lasso


def _select_r(data, path, options):
    if options.select == 'sigma':
        return select_r_sigma(data, path, options.alpha, exact=options.exact_r,
                              opts=options.path.solver)
    if options.select == 'cv':
        return select_r_cv(data, path.grid, options.folds, options.path, options.n_jobs,
                           path=path)
    if options.select == 'bic':
        return select_r_bic(data, path)
    raise ParameterError(f"unknown selection rule {options.select!r}")


def _truth_metrics(result, beta_star, j_star):
    metrics = {}
    names = beta_star.space.names
    fits = {'lasso': result.lasso.beta}
    if result.projected is not None:
        fits['projected'] = result.projected.beta
    if result.debias is not None:
        fits['debiased'] = result.debias.beta_tilde
    if result.debias_full is not None:
        fits['debiased_full'] = result.debias_full.beta_tilde
    for label, beta in fits.items():
        difference = beta - beta_star
        block_errors = coefficient_norms(difference)
        metrics[f'{label}_error'] = space_norm(difference)
        for j in sorted(j_star):
            metrics[f'{label}_error_{names[j]}'] = float(block_errors[j])
    metrics['true_support'] = sorted(j + 1 for j in j_star)
    metrics['lasso_exact_support'] = result.lasso.support == j_star
    metrics['lasso_within_truth'] = result.lasso.support <= j_star
    if result.projected is not None:
        metrics['projected_exact_support'] = result.projected.support == j_star
    return metrics


def run_pipeline(raw, options=None, truth=None):
    """Center, fit the path, choose r, then optionally project and debias.

    ``truth`` is an optional (beta*, J*) pair used for error metrics only.
    """
    options = options or PipelineOptions()
    if options.select not in SELECTORS:
        raise ParameterError(f"select must be one of {SELECTORS}, got {options.select!r}")
    timings = {}
    data = prepare(raw)
    with timed(timings, 'path'):
        path = fit_path(data, options.path)
    with timed(timings, 'selection'):
        selection = _select_r(data, path, options)
    lasso = selection.fit
    result = PipelineResult(data, path, selection, lasso, timings=timings)

    if options.project is not None:
        with timed(timings, 'dimension'):
            basis = pca_basis(data, options.dimension.tol_rank)
            weights = penalty_weights(data, selection.refit_r)
            if options.project == 'auto':
                sigma2 = selection.sigma_hat2
                if sigma2 is None:
                    sigma2 = estimate_sigma2(path, data)
                if not sigma2 > 0:
                    sigma2 = np.finfo(float).tiny
                result.dimension = select_dimension(data, basis, weights, options.kappa_pen,
                                                    sigma2, options.dimension)
                result.projected = result.dimension.fit
            else:
                result.projected = gpd_fit_projected(data, basis, int(options.project), weights,
                                                     opts=options.path.solver)
        result.selection = replace(selection, chosen_m=result.projected.m,
                                   kappa_pen=options.kappa_pen)

    rho = None
    if options.debias:
        final = result.final
        with timed(timings, 'debias'):
            rho = select_rho_cv(data, final.support, options.rho_grid, options.folds,
                                options.n_jobs)
            result.debias = tikhonov_fit(data, final.support, rho, init=final.beta,
                                         opts=options.debias_opts)
    if options.debias_full:
        if rho is None:
            rho = float(np.exp(np.mean(np.log(options.rho_grid))))
        with timed(timings, 'debias_full'):
            result.debias_full = tikhonov_fit(data, range(data.p), rho,
                                              init=result.final.beta, opts=options.debias_opts)

    metrics = {
        'support': sorted(j + 1 for j in result.final.support),
        'support_names': [data.space.names[j] for j in sorted(result.final.support)],
        'lasso_support': sorted(j + 1 for j in result.lasso.support),
        'sigma_hat2': result.selection.sigma_hat2,
        'chosen_r': result.selection.chosen_r,
        'refit_r': result.selection.refit_r,
        'chosen_m': result.selection.chosen_m,
        'r_max': float(path.grid[0]),
        'r_min_feasible': path.r_min_feasible,
        'n_converged': int(sum(path.converged)),
    }
    if result.debias is not None:
        metrics['rho'] = result.debias.rho
        metrics['debias_converged'] = result.debias.converged
        metrics['debias_steps'] = result.debias.n_steps
    if result.debias_full is not None:
        metrics['debias_full_converged'] = result.debias_full.converged
    if truth is not None:
        metrics.update(_truth_metrics(result, *truth))
    result.metrics = metrics
    return result


def run_replication(task):
    """One Monte-Carlo replication; never raises, failures are recorded."""
    rep, seed, sim_config, options = task
    record = {'rep': rep, 'seed': seed}
    try:
        raw, beta_star, j_star = simulate(replace(sim_config, seed=seed))
        result = run_pipeline(raw, options, truth=(beta_star, j_star))
        record.update(result.metrics)
        record['timings'] = result.timings
        record['first_block'] = result.final.beta.arrays[0].tolist()
        if result.debias is not None:
            record['first_block_debiased'] = result.debias.beta_tilde.arrays[0].tolist()
    except Exception as exc:  # pylint: disable=broad-except
        logger.warning("replication %d failed: %s", rep, exc)
        record['error'] = f"{type(exc).__name__}: {exc}"
        record['traceback'] = traceback.format_exc()
    return record


def run_montecarlo(sim_config, reps, options, threads=1, progress=False):
    """Seeded replications, run in worker processes; records ordered by rep."""
    seeds = replicate_seeds(sim_config.seed, reps)
    worker_options = replace(options, n_jobs=1)
    tasks = [(rep, seed, sim_config, worker_options) for rep, seed in enumerate(seeds)]
    if threads <= 1:
        records = [run_replication(task)
                   for task in tqdm(tasks, disable=not progress, desc='replications')]
    else:
        records = []
        with ProcessPoolExecutor(max_workers=threads) as executor:
            futures = [executor.submit(run_replication, task) for task in tasks]
            for future in tqdm(as_completed(futures), total=len(futures),
                               disable=not progress, desc='replications'):
                records.append(future.result())
    records.sort(key=lambda record: record['rep'])
    return records


def recovery_table(records, reps):
    """Percentages of exact support recovery, per estimator, over all replications."""
    table = {}
    for key in ('lasso_exact_support', 'projected_exact_support'):
        hits = [record.get(key) for record in records]
        if all(hit is None for hit in hits):
            continue
        table[key.replace('_exact_support', '')] = 100.0 * sum(bool(h) for h in hits) / reps
    return table


def default_sim_config(config, example, n, sigma, seed):
    return SimConfig(example=example, n=n, sigma=sigma, grid_size=config.GRID_SIZE, seed=seed)


def options_from_config(config):
    """(SolverOptions, PathOptions, DebiasOptions) for a Config class."""
    path = PathOptions.from_config(config)
    return path.solver, path, DebiasOptions.from_config(config)
