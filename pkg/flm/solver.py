"""Groupwise-majorization-descent solver for the functional group Lasso.

The criterion is

    (1/n) sum_i (Y_i - <beta, X_i>)^2 + 2 sum_j lambda_j ||beta_j||_j

and every block update minimises a quadratic upper bound of the loss whose
curvature is N_j = (1/n) sum_i ||X_i^j||_j^2, which has the closed form

    beta_j <- (beta_j + R_j / N_j) * (1 - lambda_j / ||N_j beta_j + R_j||_j)_+

with R_j = (1/n) sum_i (Y_i - Yhat_i) X_i^j. The same engine solves the
projected problem, where a block is a group of basis coordinates.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from flm.covariance import scores
from flm.errors import DegenerateDesignError, NumericError, ParameterError
from flm.hilbert import check_conforms, design_products, weighted_norms
from models import Coefficient, FitResult, PathResult, PenaltyWeights

logger = logging.getLogger(__name__)

# shrinkage factors below this are treated as exact zeros
_ZERO_SHRINK = 1e-12


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 10000
    kkt_tol: Optional[float] = None
    kkt_factor: float = 1e-6
    recompute_every: int = 100

    @classmethod
    def from_config(cls, config):
        return cls(
            tol=config.TOL,
            max_iter=config.MAX_ITER,
            kkt_factor=config.KKT_FACTOR,
            recompute_every=config.RECOMPUTE_EVERY,
        )


@dataclass(frozen=True)
class PathOptions:
    delta: float = 0.001
    n_r: int = 100
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ParameterError("delta must lie in (0, 1)")
        if self.n_r < 2:
            raise ParameterError("the grid needs at least two points")

    @classmethod
    def from_config(cls, config):
        return cls(delta=config.PATH_DELTA, n_r=config.PATH_N_R,
                   solver=SolverOptions.from_config(config))


class _Problem:
    """Block designs with their metrics, in the form the engine consumes.

    ``designs[j]`` is (n, d_j); <beta_j, X_i^j> = designs[j][i] @ (metrics[j] * beta_j).
    """

    def __init__(self, designs, metrics, y):
        self.designs = designs
        self.metrics = metrics
        self.y = y
        self.n = y.size
        self.curvatures = np.array([
            float(np.mean((design ** 2) @ metric)) if design.size else 0.0
            for design, metric in zip(designs, metrics)
        ])

    def norm(self, j, values):
        return float(np.sqrt(max(np.dot(self.metrics[j] * values, values), 0.0)))

    def fitted(self, arrays):
        out = np.zeros(self.n)
        for design, metric, values in zip(self.designs, self.metrics, arrays):
            if values.size:
                out += design @ (metric * values)
        return out

    def gradient(self, j, residuals):
        return self.designs[j].T @ residuals / self.n

    def objective(self, lambdas, arrays, residuals):
        penalty = sum(lam * self.norm(j, values) for j, (lam, values) in
                      enumerate(zip(lambdas, arrays)))
        return float(np.mean(residuals ** 2) + 2.0 * penalty)

    def kkt_gap(self, lambdas, arrays, residuals):
        gap = 0.0
        for j, values in enumerate(arrays):
            if values.size == 0:
                continue
            g = self.gradient(j, residuals)
            size = self.norm(j, values)
            if size > 0:
                violation = self.norm(j, g - lambdas[j] * values / size)
            else:
                violation = max(0.0, self.norm(j, g) - lambdas[j])
            gap = max(gap, violation)
        return gap


def _descend(problem, lambdas, init, opts, kkt_tol, trace=None):
    """Cyclic block updates until the step and KKT criteria hold or max_iter."""
    arrays = [np.array(values, dtype=float) for values in init]
    for j, curvature in enumerate(problem.curvatures):
        if curvature <= 0:
            arrays[j][:] = 0.0
    residuals = problem.y - problem.fitted(arrays)
    converged = False
    gap = np.inf
    n_iterations = 0
    for n_iterations in range(1, opts.max_iter + 1):
        largest_step = 0.0
        for j, curvature in enumerate(problem.curvatures):
            if curvature <= 0:
                continue
            current = arrays[j]
            z = curvature * current + problem.gradient(j, residuals)
            z_norm = problem.norm(j, z)
            if z_norm <= lambdas[j] * (1.0 + _ZERO_SHRINK) or z_norm == 0.0:
                new = np.zeros_like(current)
            else:
                new = z / curvature * (1.0 - lambdas[j] / z_norm)
            delta = new - current
            if np.any(delta):
                residuals -= problem.designs[j] @ (problem.metrics[j] * delta)
                arrays[j] = new
                largest_step = max(largest_step, curvature * problem.norm(j, delta) ** 2)
            if trace is not None:
                trace.append(problem.objective(lambdas, arrays, residuals))
        if n_iterations % opts.recompute_every == 0:
            residuals = problem.y - problem.fitted(arrays)
        if not np.all(np.isfinite(residuals)):
            raise NumericError(f"residuals became non-finite after {n_iterations} cycles")
        if largest_step <= opts.tol:
            gap = problem.kkt_gap(lambdas, arrays, residuals)
            if gap <= kkt_tol:
                converged = True
                break
    if not converged:
        gap = problem.kkt_gap(lambdas, arrays, residuals)
    return arrays, residuals, n_iterations, converged, gap


def _data_problem(data):
    return _Problem(list(data.blocks), [spec.weights for spec in data.space.blocks], data.y)


def penalty_weights(data, r):
    """lambda_j = r * sqrt(N_j) with N_j = (1/n) sum_i ||X_i^j||_j^2."""
    if r < 0:
        raise ParameterError("r must be nonnegative")
    n_weights = _data_problem(data).curvatures
    return PenaltyWeights(float(r), float(r) * np.sqrt(n_weights), n_weights)


def r_max(data):
    """Smallest r for which the zero coefficient solves the criterion."""
    problem = _data_problem(data)
    active = np.flatnonzero(problem.curvatures > 0)
    if active.size == 0:
        raise DegenerateDesignError("every covariate block is identically zero")
    ratios = [
        problem.norm(j, problem.gradient(j, data.y)) / np.sqrt(problem.curvatures[j])
        for j in active
    ]
    return float(max(ratios))


def _kkt_tolerance(data, opts):
    if opts.kkt_tol is not None:
        return opts.kkt_tol
    try:
        scale = r_max(data)
    except DegenerateDesignError:
        scale = 1.0
    return opts.kkt_factor * scale + 1e-14


def objective(data, weights, beta):
    check_conforms(beta, data)
    residuals = data.y - design_products(data, beta.arrays)
    norms = weighted_norms(data.space, beta.arrays)
    return float(np.mean(residuals ** 2) + 2.0 * np.dot(weights.lambdas, norms))


def kkt_check(data, weights, beta):
    """Largest violation of the subgradient optimality conditions."""
    check_conforms(beta, data)
    problem = _data_problem(data)
    residuals = data.y - problem.fitted(beta.arrays)
    return problem.kkt_gap(weights.lambdas, beta.arrays, residuals)


def _support(space, arrays):
    return frozenset(int(j) for j in np.flatnonzero(weighted_norms(space, arrays) > 0))


def gpd_fit(data, weights, init=None, opts=None, trace=None):
    """Minimise the group Lasso criterion over H by groupwise majorization descent.

    Pass a list as ``trace`` to record the criterion after every block update.
    """
    opts = opts or SolverOptions()
    if init is None:
        init = Coefficient.zeros(data.space)
    check_conforms(init, data)
    if len(weights.lambdas) != data.p:
        raise ParameterError("penalty weights do not match the number of blocks")
    problem = _data_problem(data)
    arrays, _, n_iterations, converged, gap = _descend(
        problem, weights.lambdas, init.arrays, opts, _kkt_tolerance(data, opts), trace
    )
    beta = Coefficient.from_arrays(data.space, arrays)
    if not converged:
        logger.debug("no convergence at r=%.4g after %d cycles (kkt %.3g)",
                     weights.r, n_iterations, gap)
    return FitResult(
        beta=beta,
        support=_support(data.space, arrays),
        objective=objective(data, weights, beta),
        n_iterations=n_iterations,
        converged=converged,
        kkt_gap=float(gap),
        weights=weights,
    )


def basis_coordinates(beta, basis, m):
    """Coordinates <beta, phi^(k)> for k < m."""
    return np.array([
        float(np.dot(beta.space.blocks[j].weights * beta.arrays[j], basis.eigenvectors[j][k]))
        for j, k in basis.sigma[:m]
    ])


def gpd_fit_projected(data, basis, m, weights, opts=None, init=None):
    """Minimise the criterion over H^(m) = span{phi^(1), ..., phi^(m)}.

    Every phi^(k) lives in one block, so the penalty becomes a group norm over
    the coordinate groups g_j(m) and the same block update applies.
    ``init`` is an optional warm start (a Coefficient, projected onto H^(m)).
    """
    opts = opts or SolverOptions()
    if not 1 <= m <= basis.size:
        raise ParameterError(f"dimension m={m} outside 1..{basis.size}")
    z = scores(data, basis, m)
    groups = basis.groups(m)
    designs = [z[:, group] for group in groups]
    metrics = [np.ones(len(group)) for group in groups]
    problem = _Problem(designs, metrics, data.y)
    start = np.zeros(m) if init is None else basis_coordinates(init, basis, m)
    init_arrays = [start[group] for group in groups]
    coords, _, n_iterations, converged, gap = _descend(
        problem, weights.lambdas, init_arrays, opts, _kkt_tolerance(data, opts)
    )
    arrays = [np.zeros(size) for size in data.space.sizes]
    for j, group in enumerate(groups):
        for value, position in zip(coords[j], group):
            _, k = basis.sigma[position]
            arrays[j] += value * basis.eigenvectors[j][k]
    beta = Coefficient.from_arrays(data.space, arrays)
    supported = frozenset(j for j, values in enumerate(coords) if np.any(values))
    return FitResult(
        beta=beta,
        support=supported,
        objective=objective(data, weights, beta),
        n_iterations=n_iterations,
        converged=converged,
        kkt_gap=float(gap),
        weights=weights,
        m=m,
    )


def r_grid(r_top, delta, n_r):
    """Decreasing grid of n_r values, equally spaced in log scale from r_top to delta * r_top."""
    if r_top <= 0:
        return np.zeros(n_r)
    r_bottom = delta * r_top
    k = np.arange(n_r)
    grid = np.exp(np.log(r_bottom) + k * (np.log(r_top) - np.log(r_bottom)) / (n_r - 1))
    grid = grid[::-1].copy()
    grid[0] = r_top
    return grid


def fit_path(data, opts=None, basis=None, m=None, grid=None):
    """Warm-started fits from r_max down to delta * r_max.

    With ``basis`` and ``m`` the projected estimator is fitted instead.
    """
    opts = opts or PathOptions()
    if (basis is None) != (m is None):
        raise ParameterError("the projected path needs both a basis and a dimension")
    top = r_max(data)
    if grid is None:
        grid = r_grid(top, opts.delta, opts.n_r)
        if top == 0:
            logger.info("response is orthogonal to every block; the whole path is zero")
    grid = np.asarray(grid, dtype=float)
    solver_opts = opts.solver
    if solver_opts.kkt_tol is None:
        solver_opts = replace(solver_opts, kkt_tol=solver_opts.kkt_factor * top + 1e-14)
    fits, norms = [], []
    warm = Coefficient.zeros(data.space)
    failed_at = None
    for r in grid:
        weights = penalty_weights(data, r)
        try:
            if basis is None:
                fit = gpd_fit(data, weights, init=warm, opts=solver_opts)
            else:
                fit = gpd_fit_projected(data, basis, m, weights, opts=solver_opts, init=warm)
        except NumericError as exc:
            logger.warning("fit at r=%.4g failed: %s", r, exc)
            fit = FitResult(warm, _support(data.space, warm.arrays), float('nan'), 0, False,
                            float('inf'), weights, m)
        if not fit.converged and failed_at is None:
            failed_at = r
            logger.info("first non-converged fit at r=%.4g (%.3g of r_max)",
                        r, r / top if top else 0.0)
        fits.append(fit)
        norms.append(weighted_norms(data.space, fit.beta.arrays))
        warm = fit.beta
    converged_r = [r for r, fit in zip(grid, fits) if fit.converged]
    return PathResult(
        grid=grid,
        fits=tuple(fits),
        per_r_block_norms=np.array(norms),
        r_min_feasible=float(min(converged_r)) if converged_r else None,
        m=m,
    )
