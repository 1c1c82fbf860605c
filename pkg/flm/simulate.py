"""Synthetic designs with seven heterogeneous blocks and two sparse truths.

Blocks: X1 Brownian motion, X2 a + bt + c exp(t) + sin(dt), X3 = X2^2 (curves
on a uniform grid over [0, 1]); X4 = Z A^T in R^4; X5 standard normal;
X6 and X7 centred L2 norms of X2 and log|X1|.
"""

import logging

import numpy as np
from scipy.integrate import trapezoid

from flm.hilbert import design_products
from models import BlockSpec, Coefficient, Dataset, SpaceSpec

logger = logging.getLogger(__name__)

MIXING = np.array([
    [-1.0, 0.0, 1.0, 2.0],
    [3.0, -1.0, 0.0, 1.0],
    [2.0, 3.0, -1.0, 0.0],
    [1.0, 2.0, 3.0, -1.0],
])

# floor on |X1(t)| before taking logs
LOG_FLOOR = 1e-12


def simulation_space(grid_size):
    grid = np.linspace(0.0, 1.0, grid_size)
    return SpaceSpec((
        BlockSpec.curve(grid, 'X1'),
        BlockSpec.curve(grid, 'X2'),
        BlockSpec.curve(grid, 'X3'),
        BlockSpec.vector(4, 'X4'),
        BlockSpec.scalar('X5'),
        BlockSpec.scalar('X6'),
        BlockSpec.scalar('X7'),
    ))


def true_coefficient(space, example):
    """beta* and its support J* (0-based block indices)."""
    grid = space.blocks[0].grid
    arrays = [np.zeros(size) for size in space.sizes]
    if example == 0:
        return Coefficient.from_arrays(space, arrays), frozenset()
    arrays[0] = 10.0 * np.cos(2.0 * np.pi * grid)
    if example == 1:
        return Coefficient.from_arrays(space, arrays), frozenset({0})
    arrays[3] = np.array([1.0, -1.0, 0.0, 3.0])
    arrays[6] = np.array([1.0])
    return Coefficient.from_arrays(space, arrays), frozenset({0, 3, 6})


def brownian_paths(rng, n, grid):
    steps = np.diff(grid)
    increments = rng.normal(0.0, 1.0, size=(n, steps.size)) * np.sqrt(steps)
    paths = np.zeros((n, grid.size))
    paths[:, 1:] = np.cumsum(increments, axis=1)
    return paths


def _l2_norms(curves, grid):
    return np.sqrt(trapezoid(curves ** 2, grid, axis=1))


def simulate(config):
    """Draw one sample of the design; returns (uncentered dataset, beta*, J*)."""
    rng = np.random.default_rng(config.seed)
    space = simulation_space(config.grid_size)
    grid = space.blocks[0].grid
    n = config.n

    x1 = brownian_paths(rng, n, grid)
    a = rng.uniform(-50.0, 50.0, size=(n, 1))
    b = rng.uniform(-30.0, 30.0, size=(n, 1))
    c = rng.uniform(-5.0, 5.0, size=(n, 1))
    d = rng.uniform(-1.0, 1.0, size=(n, 1))
    x2 = a + b * grid + c * np.exp(grid) + np.sin(d * grid)
    x3 = x2 ** 2
    z = rng.uniform(-0.5, 0.5, size=(n, 4))
    x4 = z @ MIXING.T
    x5 = rng.normal(0.0, 1.0, size=(n, 1))
    norms2 = _l2_norms(x2, grid)
    x6 = (norms2 - norms2.mean()).reshape(n, 1)
    log_norms = _l2_norms(np.log(np.maximum(np.abs(x1), LOG_FLOOR)), grid)
    x7 = (log_norms - log_norms.mean()).reshape(n, 1)
    noise = rng.normal(0.0, 1.0, size=n)

    blocks = (x1, x2, x3, x4, x5, x6, x7)
    beta, j_star = true_coefficient(space, config.example)
    signal = design_products(Dataset(space, blocks, np.zeros(n)), beta.arrays)
    y = signal + config.sigma * noise
    logger.debug("simulated example %d with n=%d, seed=%d", config.example, n, config.seed)
    return Dataset(space, blocks, y), beta, j_star


def replicate_seeds(seed, reps):
    """Independent child seeds for Monte-Carlo replications."""
    children = np.random.SeedSequence(seed).spawn(reps)
    return [int(child.generate_state(1)[0]) for child in children]
