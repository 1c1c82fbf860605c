"""Dimension selection, noise-variance estimation and the three rules for r."""

import logging
from dataclasses import dataclass, field

import numpy as np

from flm.covariance import m_max, n_n_empirical
from flm.errors import DegenerateDesignError, ParameterError, SelectionError
from flm.hilbert import center_with, design_products, prepare
from flm.solver import SolverOptions, fit_path, gpd_fit, gpd_fit_projected, penalty_weights
from flm.utils import map_ordered
from models import DimensionReport, SelectionReport

logger = logging.getLogger(__name__)

# floor applied to residual variances before taking logs in BIC
_SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class DimensionOptions:
    cap: str = 'formula'
    max_dim: int = None
    tol_rank: float = 1e-10
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.cap not in ('formula', 'rank'):
            raise ParameterError(f"cap must be 'formula' or 'rank', got {self.cap!r}")


def mean_squared_residual(data, beta):
    return float(np.mean((data.y - design_products(data, beta.arrays)) ** 2))


def dimension_upper(data, basis, opts):
    """Largest admissible m: min(N_n, M_n) or M_n alone, optionally capped."""
    rank = m_max(data, basis, opts.tol_rank)
    if rank == 0:
        raise DegenerateDesignError("the empirical covariance is zero on every basis element")
    upper = rank
    if opts.cap == 'formula':
        upper = min(upper, n_n_empirical(basis, data.n))
    if opts.max_dim is not None:
        upper = min(upper, opts.max_dim)
    if upper < 1:
        raise SelectionError(
            "no merged eigenvalue reaches sqrt(log(n)^3/n); use the rank cap instead"
        )
    return upper


def select_dimension(data, basis, weights, kappa_pen=2.0, sigma2=None, opts=None):
    """Penalised choice of m: RSS/n + kappa * sigma2 * m * log(n) / n, smallest minimiser."""
    opts = opts or DimensionOptions()
    if kappa_pen <= 0:
        raise ParameterError("kappa must be positive")
    if sigma2 is None or not sigma2 > 0:
        raise ParameterError("sigma2 must be positive")
    upper = dimension_upper(data, basis, opts)
    log_n = np.log(data.n)
    table, best, warm = [], None, None
    for m in range(1, upper + 1):
        fit = gpd_fit_projected(data, basis, m, weights, opts=opts.solver, init=warm)
        warm = fit.beta
        rss = mean_squared_residual(data, fit.beta)
        score = rss + kappa_pen * sigma2 * m * log_n / data.n
        table.append({'m': m, 'rss': rss, 'score': score, 'converged': fit.converged,
                      'support': sorted(fit.support)})
        if best is None or score < best[0]:
            best = (score, m, fit)
    logger.info("selected dimension m=%d among 1..%d (cap %s)", best[1], upper, opts.cap)
    return DimensionReport(chosen_m=best[1], score_table=table, fit=best[2],
                           cap=opts.cap, upper=upper)


def estimate_sigma2(path, data):
    """Mean squared residual of the fit at the smallest converged r."""
    if path.r_min_feasible is None:
        raise SelectionError("no fit on the path converged; sigma^2 cannot be estimated")
    index = max(k for k, fit in enumerate(path.fits) if fit.converged)
    return mean_squared_residual(data, path.fits[index].beta)


def sigma_rule_r(sigma_hat2, n, p, alpha=0.05):
    """4 sqrt(2) sigma sqrt(q ln(p) / n) with q = 1 - ln(alpha) / ln(p)."""
    if p < 2:
        raise SelectionError("the plug-in rule needs p >= 2 (ln p = 0)")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    q = 1.0 - np.log(alpha) / np.log(p)
    return float(4.0 * np.sqrt(2.0) * np.sqrt(sigma_hat2) * np.sqrt(q * np.log(p) / n))


def _snap_up(grid, r):
    above = grid[grid >= r]
    if above.size == 0:
        return float(np.max(grid))
    return float(np.min(above))


def select_r_sigma(data, path, alpha=0.05, exact=False, opts=None):
    """Plug-in r from the estimated noise level, refitted on the grid (or exactly)."""
    sigma_hat2 = estimate_sigma2(path, data)
    r_hat = sigma_rule_r(sigma_hat2, data.n, data.p, alpha)
    if exact:
        refit_r = r_hat
        above = [k for k, r in enumerate(path.grid) if r >= r_hat]
        warm = path.fits[max(above)].beta if above else None
        fit = gpd_fit(data, penalty_weights(data, r_hat), init=warm, opts=opts)
    else:
        refit_r = _snap_up(path.grid, r_hat)
        fit = path.fit_at(refit_r)
    logger.info("sigma^2 estimate %.4g gives r=%.4g (refit at %.4g)", sigma_hat2, r_hat, refit_r)
    return SelectionReport(
        method='SigmaHat',
        chosen_r=r_hat,
        score_table=[{'r': r_hat, 'score': sigma_hat2}],
        kappa_pen=float('nan'),
        sigma_hat2=sigma_hat2,
        fit=fit,
        refit_r=refit_r,
    )


def cv_folds(n, V):
    """Contiguous folds: fold v holds indices floor(v n / V) .. floor((v + 1) n / V) - 1."""
    if V < 2 or V > n:
        raise ParameterError(f"V must satisfy 2 <= V <= n, got V={V}, n={n}")
    folds = []
    for v in range(V):
        start, stop = (v * n) // V, ((v + 1) * n) // V
        if stop - start < 1:
            raise SelectionError(f"fold {v + 1} holds no observation")
        folds.append(np.arange(start, stop))
    return folds


def _train_and_test(data, fold):
    mask = np.ones(data.n, dtype=bool)
    mask[fold] = False
    train = prepare(data.subset(np.flatnonzero(mask)))
    test = center_with(data.subset(fold), train.meta)
    return train, test


def _fold_errors(data, fold, grid, opts):
    train, test = _train_and_test(data, fold)
    path = fit_path(train, opts, grid=grid)
    errors = [float(np.sum((test.y - design_products(test, fit.beta.arrays)) ** 2))
              for fit in path.fits]
    return np.array(errors), np.array(path.converged, dtype=bool)


def select_r_cv(data, grid, V=5, opts=None, n_jobs=1, path=None):
    """V-fold cross-validation over a decreasing grid of r; ties go to the larger r."""
    grid = np.asarray(grid, dtype=float)
    folds = cv_folds(data.n, V)
    results = map_ordered(lambda fold: _fold_errors(data, fold, grid, opts), folds, n_jobs)
    errors = sum(result[0] for result in results) / data.n
    converged = np.mean([result[1] for result in results], axis=0)
    best = int(np.argmin(errors))
    table = [{'r': float(r), 'score': float(e), 'converged_fraction': float(c)}
             for r, e, c in zip(grid, errors, converged)]
    chosen = float(grid[best])
    logger.info("cross-validation selected r=%.4g (error %.4g)", chosen, errors[best])
    return SelectionReport(
        method='CV',
        chosen_r=chosen,
        score_table=table,
        kappa_pen=float('nan'),
        fit=None if path is None else path.fits[best],
        refit_r=chosen,
    )


def select_r_bic(data, path):
    """argmin of log(sigma_r^2) + |J_r| log(n) / n over converged grid points."""
    candidates = [k for k, fit in enumerate(path.fits) if fit.converged]
    if not candidates:
        logger.warning("no converged fit on the path; BIC scores every grid point")
        candidates = list(range(len(path.fits)))
    table, best = [], None
    for k in candidates:
        fit = path.fits[k]
        sigma2 = max(mean_squared_residual(data, fit.beta), _SIGMA_FLOOR)
        score = float(np.log(sigma2) + len(fit.support) * np.log(data.n) / data.n)
        table.append({'r': float(path.grid[k]), 'score': score, 'sigma2': sigma2,
                      'support_size': len(fit.support)})
        if best is None or score < best[0]:
            best = (score, k)
    chosen = float(path.grid[best[1]])
    return SelectionReport(
        method='BIC',
        chosen_r=chosen,
        score_table=table,
        kappa_pen=float('nan'),
        fit=path.fits[best[1]],
        refit_r=chosen,
    )
