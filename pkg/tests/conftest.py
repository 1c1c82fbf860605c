import pytest
import os
import sys

import numpy as np
from click.testing import CliRunner

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app import cli
from config import TestingConfig
from flm.hilbert import prepare
from flm.simulate import simulate
from models import BlockSpec, Dataset, SimConfig, SpaceSpec


def random_dataset(seed, n=25, sizes=(1, 3, 2), curve_points=0, noise=0.5, sparse=True):
    """Small uncentered dataset with scalar/vector blocks and an optional curve block.

    The response depends on the first block only when ``sparse`` is set.
    """
    rng = np.random.default_rng(seed)
    specs, blocks = [], []
    for size in sizes:
        specs.append(BlockSpec.scalar() if size == 1 else BlockSpec.vector(size))
        blocks.append(rng.normal(size=(n, size)))
    if curve_points:
        grid = np.linspace(0.0, 1.0, curve_points)
        specs.append(BlockSpec.curve(grid))
        blocks.append(np.cumsum(rng.normal(size=(n, curve_points)), axis=1) / np.sqrt(curve_points))
    space = SpaceSpec(tuple(specs))
    if sparse:
        signal = blocks[0] @ rng.normal(size=blocks[0].shape[1]) * 2.0
    else:
        signal = sum(block @ rng.normal(size=block.shape[1]) for block in blocks)
    y = signal + noise * rng.normal(size=n)
    return Dataset(space, tuple(blocks), y)


@pytest.fixture
def make_dataset():
    """Factory for small random datasets (see ``random_dataset``)."""
    return random_dataset


@pytest.fixture
def small_data():
    """A centered dataset with a scalar, a vector and a curve block."""
    return prepare(random_dataset(7, n=30, sizes=(1, 3), curve_points=12))


@pytest.fixture(scope='session')
def example1():
    """Example 1 at reduced size: (centered data, beta*, J*)."""
    raw, beta, j_star = simulate(SimConfig(example=1, n=300, sigma=0.01, grid_size=50, seed=3))
    return prepare(raw), beta, j_star


@pytest.fixture(scope='session')
def example2():
    raw, beta, j_star = simulate(SimConfig(example=2, n=300, sigma=0.01, grid_size=50, seed=4))
    return prepare(raw), beta, j_star


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


@pytest.fixture
def invoke(runner, tmp_path):
    """Run the CLI with the testing configuration, writing into a temporary directory."""
    def _invoke(*args):
        return runner.invoke(cli, ['--out-dir', str(tmp_path), *[str(a) for a in args]],
                             obj=TestingConfig)
    return _invoke
