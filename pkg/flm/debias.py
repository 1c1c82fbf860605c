"""Tikhonov refit on the Lasso support.

Minimises (1/n) sum_i (Y_i - <beta, X_i>)^2 + rho ||beta||^2 over the blocks
of a given support by the gradient recursion

    beta <- beta - alpha_k (-2 Delta + 2 (Gamma_J + rho I) beta),

with alpha_k = alpha_1 / k. ``tikhonov_direct`` solves the same problem
exactly through the n x n kernel system and is used for cross-validation.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from flm.errors import ParameterError
from flm.hilbert import center_with, prepare
from flm.selection import cv_folds
from flm.utils import map_ordered
from models import Coefficient, DebiasResult

logger = logging.getLogger(__name__)

SCHEDULES = ('harmonic', 'constant')


@dataclass(frozen=True)
class DebiasOptions:
    grad_tol: Optional[float] = None
    max_steps: int = 100000
    schedule: str = 'harmonic'

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise ParameterError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")

    @classmethod
    def from_config(cls, config):
        return cls(max_steps=config.DEBIAS_MAX_STEPS, schedule=config.DEBIAS_SCHEDULE)


def default_rho_grid(rho_min=1e-6, rho_max=10.0, n_rho=20):
    return np.logspace(np.log10(rho_min), np.log10(rho_max), n_rho)


class _RidgeOperator:
    """Gamma_J restricted to the support, in the cheaper of two forms.

    With few stored values per observation the (D, D) second-moment matrix is
    formed once; otherwise products go through the (n, D) design.
    """

    def __init__(self, data, support):
        self.support = sorted(support)
        self.n = data.n
        self.design = np.hstack([data.blocks[j] for j in self.support])
        self.metric = np.concatenate([data.space.blocks[j].weights for j in self.support])
        sizes = [data.space.blocks[j].size for j in self.support]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.delta = self.design.T @ data.y / self.n
        self.moment = None
        if self.design.shape[1] < self.n:
            self.moment = self.design.T @ self.design / self.n
        self.curvature = float(np.mean((self.design ** 2) @ self.metric))

    def gamma(self, beta):
        weighted = self.metric * beta
        if self.moment is not None:
            return self.moment @ weighted
        return self.design.T @ (self.design @ weighted) / self.n

    def norm(self, values):
        return float(np.sqrt(max(np.dot(self.metric * values, values), 0.0)))

    def ridge_objective(self, y, beta, rho):
        residuals = y - self.design @ (self.metric * beta)
        return float(np.mean(residuals ** 2) + rho * self.norm(beta) ** 2)

    def stack(self, coefficient):
        return np.concatenate([coefficient.arrays[j] for j in self.support])

    def unstack(self, space, flat):
        arrays = [np.zeros(size) for size in space.sizes]
        for position, j in enumerate(self.support):
            arrays[j] = flat[self.offsets[position]:self.offsets[position + 1]]
        return Coefficient.from_arrays(space, arrays)


def _check_rho(rho):
    if not rho > 0:
        raise ParameterError(f"rho must be positive, got {rho}")


def tikhonov_fit(data, support, rho, init=None, opts=None, trace=None):
    """Gradient recursion for the ridge problem restricted to ``support``.

    ``init`` must vanish outside the support; the Lasso solution is the usual
    starting point. Pass a list as ``trace`` to record the ridge criterion.
    """
    _check_rho(rho)
    opts = opts or DebiasOptions()
    support = frozenset(int(j) for j in support)
    if not support:
        return DebiasResult(Coefficient.zeros(data.space), float(rho), 0, 0.0,
                            1.0 / (2.0 * rho), True)
    if init is None:
        init = Coefficient.zeros(data.space)
    outside = [j for j in range(data.p) if j not in support and np.any(init.arrays[j])]
    if outside:
        raise ParameterError(f"initial value is nonzero outside the support on blocks {outside}")
    operator = _RidgeOperator(data, support)
    alpha1 = 1.0 / (2.0 * (rho + operator.curvature))
    grad_tol = opts.grad_tol
    if grad_tol is None:
        grad_tol = 1e-8 * (1.0 + operator.norm(operator.delta))
    beta = operator.stack(init).astype(float)
    gradient = -2.0 * operator.delta + 2.0 * (operator.gamma(beta) + rho * beta)
    gradient_norm = operator.norm(gradient)
    steps = 0
    while gradient_norm > grad_tol and steps < opts.max_steps:
        steps += 1
        step = alpha1 / steps if opts.schedule == 'harmonic' else alpha1
        beta = beta - step * gradient
        gradient = -2.0 * operator.delta + 2.0 * (operator.gamma(beta) + rho * beta)
        gradient_norm = operator.norm(gradient)
        if trace is not None:
            trace.append(operator.ridge_objective(data.y, beta, rho))
    converged = gradient_norm <= grad_tol
    if not converged:
        logger.info("Tikhonov recursion stopped after %d steps with gradient norm %.3g",
                    steps, gradient_norm)
    return DebiasResult(
        beta_tilde=operator.unstack(data.space, beta),
        rho=float(rho),
        n_steps=steps,
        gradient_norm=float(gradient_norm),
        alpha1=alpha1,
        converged=converged,
    )


class _KernelRidge:
    """Exact ridge solutions on a support through K = sum_j X_j W_j X_j^T."""

    def __init__(self, data, support):
        self.data = data
        self.support = sorted(support)
        n = data.n
        kernel = np.zeros((n, n))
        for j in self.support:
            block = data.blocks[j]
            kernel += (block * data.space.blocks[j].weights) @ block.T
        self.values, self.vectors = linalg.eigh((kernel + kernel.T) / 2.0)
        self.projected_y = self.vectors.T @ data.y

    def dual(self, rho):
        shifted = np.maximum(self.values, 0.0) + self.data.n * rho
        return self.vectors @ (self.projected_y / shifted)

    def coefficient(self, rho):
        c = self.dual(rho)
        arrays = [np.zeros(size) for size in self.data.space.sizes]
        for j in self.support:
            arrays[j] = self.data.blocks[j].T @ c
        return Coefficient.from_arrays(self.data.space, arrays)


def tikhonov_direct(data, support, rho):
    """(Gamma_J + rho I)^{-1} Delta via (K + n rho I) c = y and beta_j = X_j^T c."""
    _check_rho(rho)
    if not support:
        return Coefficient.zeros(data.space)
    return _KernelRidge(data, support).coefficient(rho)


def _fold_scores(data, fold, support, rho_grid):
    mask = np.ones(data.n, dtype=bool)
    mask[fold] = False
    train = prepare(data.subset(np.flatnonzero(mask)))
    test = center_with(data.subset(fold), train.meta)
    solver = _KernelRidge(train, support)
    errors = []
    for rho in rho_grid:
        beta = solver.coefficient(rho)
        fitted = sum(test.blocks[j] @ (test.space.blocks[j].weights * beta.arrays[j])
                     for j in solver.support)
        errors.append(float(np.sum((test.y - fitted) ** 2)))
    return np.array(errors)


def rho_cv_scores(data, support, rho_grid, V=5, n_jobs=1):
    """Mean held-out squared error of the exact ridge fit for every rho."""
    rho_grid = np.asarray(rho_grid, dtype=float)
    folds = cv_folds(data.n, V)
    per_fold = map_ordered(lambda fold: _fold_scores(data, fold, support, rho_grid),
                           folds, n_jobs)
    return sum(per_fold) / data.n


def select_rho_cv(data, support, rho_grid, V=5, n_jobs=1):
    """rho minimising the V-fold error; ties go to the larger rho."""
    rho_grid = np.asarray(rho_grid, dtype=float)
    if rho_grid.size == 0:
        raise ParameterError("the rho grid is empty")
    for rho in rho_grid:
        _check_rho(rho)
    if not support:
        return float(np.max(rho_grid))
    order = np.argsort(-rho_grid, kind='stable')
    scores = rho_cv_scores(data, support, rho_grid[order], V, n_jobs)
    chosen = float(rho_grid[order][int(np.argmin(scores))])
    logger.info("cross-validation selected rho=%.3g", chosen)
    return chosen
