import time

import numpy as np
import pytest

from flm.covariance import pca_basis, project
from flm.errors import DegenerateDesignError, ParameterError
from flm.hilbert import prepare, space_norm, support
from flm.solver import (
    PathOptions,
    SolverOptions,
    basis_coordinates,
    fit_path,
    gpd_fit,
    gpd_fit_projected,
    kkt_check,
    objective,
    penalty_weights,
    r_grid,
    r_max,
)
from models import BlockSpec, Coefficient, Dataset, SpaceSpec
from oracles import proximal_group_lasso

TIGHT = SolverOptions(tol=1e-14, max_iter=100000)


def _instances(make_dataset, count, start=0):
    rng = np.random.default_rng(start)
    for seed in range(start, start + count):
        sizes = tuple(int(s) for s in rng.integers(1, 4, size=int(rng.integers(1, 5))))
        n = int(rng.integers(15, 31))
        yield prepare(make_dataset(seed, n=n, sizes=sizes, sparse=bool(seed % 2)))


def test_fit_matches_proximal_gradient_oracle(make_dataset):
    """
    GIVEN 50 random small instances and r between 5% and 90% of r_max
    WHEN the block descent and an accelerated proximal gradient solver are run
    THEN check the criteria agree to 1e-8 relative and the KKT gap is within 1e-6 r_max
    """
    rng = np.random.default_rng(100)
    elapsed = 0.0
    for data in _instances(make_dataset, 50):
        top = r_max(data)
        weights = penalty_weights(data, top * rng.uniform(0.05, 0.9))
        start = time.perf_counter()
        fit = gpd_fit(data, weights, opts=TIGHT)
        elapsed += time.perf_counter() - start
        _, reference = proximal_group_lasso(data, weights.lambdas)
        assert fit.converged
        assert fit.objective == pytest.approx(reference, rel=1e-8)
        assert fit.kkt_gap <= 1e-6 * top
    assert elapsed < 10.0


def test_fit_is_exactly_zero_at_r_max(make_dataset):
    """
    GIVEN 20 random datasets
    WHEN the criterion is minimised at r = r_max
    THEN check every block of the solution is exactly zero
    """
    for data in _instances(make_dataset, 20, start=200):
        fit = gpd_fit(data, penalty_weights(data, r_max(data)))
        assert fit.support == frozenset()
        assert all(not np.any(values) for values in fit.beta.arrays)
        assert fit.converged


def test_fit_below_r_max_is_nonzero(make_dataset):
    data = prepare(make_dataset(300, n=30))
    fit = gpd_fit(data, penalty_weights(data, 0.9 * r_max(data)))
    assert fit.support


def test_block_updates_never_increase_criterion(make_dataset):
    """
    GIVEN 20 random instances
    WHEN the criterion is recorded after every block update
    THEN check it never increases by more than 1e-12
    """
    rng = np.random.default_rng(400)
    for data in _instances(make_dataset, 20, start=400):
        weights = penalty_weights(data, r_max(data) * rng.uniform(0.01, 0.5))
        trace = []
        gpd_fit(data, weights, trace=trace)
        assert trace
        assert all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(trace, trace[1:]))


def test_zero_penalty_gives_least_squares():
    """
    GIVEN a single full-rank vector block and r = 0
    WHEN the criterion is minimised
    THEN check the fit is the ordinary least squares solution
    """
    rng = np.random.default_rng(8)
    x = rng.normal(size=(40, 3))
    y = x @ np.array([1.0, -2.0, 0.5]) + 0.1 * rng.normal(size=40)
    data = prepare(Dataset(SpaceSpec((BlockSpec.vector(3),)), (x,), y))
    fit = gpd_fit(data, penalty_weights(data, 0.0), opts=TIGHT)
    expected, *_ = np.linalg.lstsq(data.blocks[0], data.y, rcond=None)
    np.testing.assert_allclose(fit.beta.arrays[0], expected, atol=1e-6)


def test_single_scalar_block_closed_form():
    """
    GIVEN one scalar block with X = (1, -1) and Y = (1, -1)
    WHEN fitted at r = 0.5 (lambda = 0.5, N = 1)
    THEN check beta = 1 - lambda
    """
    space = SpaceSpec((BlockSpec.scalar(),))
    data = Dataset(space, (np.array([[1.0], [-1.0]]),), np.array([1.0, -1.0]))
    assert r_max(data) == pytest.approx(1.0)
    fit = gpd_fit(data, penalty_weights(data, 0.5))
    assert fit.beta.arrays[0][0] == pytest.approx(0.5)


def test_constant_zero_block_is_never_selected(make_dataset):
    raw = make_dataset(9, n=20, sizes=(2, 1))
    blocks = (raw.blocks[0], np.zeros((20, 1)))
    data = prepare(Dataset(raw.space, blocks, raw.y))
    fit = gpd_fit(data, penalty_weights(data, 0.0))
    assert 1 not in fit.support


def test_all_zero_design_is_degenerate():
    space = SpaceSpec((BlockSpec.scalar(), BlockSpec.vector(2)))
    data = Dataset(space, (np.zeros((5, 1)), np.zeros((5, 2))), np.arange(5.0))
    with pytest.raises(DegenerateDesignError):
        r_max(data)


def test_negative_r_is_rejected(small_data):
    with pytest.raises(ParameterError):
        penalty_weights(small_data, -1.0)


def test_kkt_check_and_objective_agree_with_fit(small_data):
    weights = penalty_weights(small_data, 0.3 * r_max(small_data))
    fit = gpd_fit(small_data, weights, opts=TIGHT)
    assert kkt_check(small_data, weights, fit.beta) == pytest.approx(fit.kkt_gap, abs=1e-10)
    assert objective(small_data, weights, fit.beta) == pytest.approx(fit.objective)
    zero = Coefficient.zeros(small_data.space)
    assert objective(small_data, weights, zero) == pytest.approx(np.mean(small_data.y ** 2))


def test_kkt_gap_detects_a_perturbed_active_block(small_data):
    """
    GIVEN a converged fit with a nonempty support
    WHEN one active block is moved by a large vector
    THEN check the KKT gap rises above the convergence tolerance
    """
    top = r_max(small_data)
    weights = penalty_weights(small_data, 0.3 * top)
    fit = gpd_fit(small_data, weights, opts=TIGHT)
    assert fit.converged and fit.support
    assert kkt_check(small_data, weights, fit.beta) <= 1e-6 * top
    arrays = fit.beta.arrays
    j = min(fit.support)
    arrays[j] = arrays[j] + 10.0 * np.ones_like(arrays[j])
    moved = Coefficient.from_arrays(small_data.space, arrays)
    assert kkt_check(small_data, weights, moved) > 1e-6 * top


def test_warm_start_reaches_same_solution(small_data):
    weights = penalty_weights(small_data, 0.2 * r_max(small_data))
    cold = gpd_fit(small_data, weights, opts=TIGHT)
    warm_start = gpd_fit(small_data, penalty_weights(small_data, 0.4 * r_max(small_data)))
    warm = gpd_fit(small_data, weights, init=warm_start.beta, opts=TIGHT)
    assert space_norm(cold.beta - warm.beta) <= 1e-6


def test_iteration_cap_reports_non_convergence(small_data):
    weights = penalty_weights(small_data, 0.01 * r_max(small_data))
    fit = gpd_fit(small_data, weights, opts=SolverOptions(tol=1e-14, max_iter=1))
    assert not fit.converged
    assert fit.n_iterations == 1


def test_grid_is_decreasing_and_log_spaced():
    grid = r_grid(2.0, 0.001, 100)
    assert grid[0] == 2.0
    assert grid[-1] == pytest.approx(0.002)
    assert np.all(np.diff(grid) < 0)
    ratios = grid[1:] / grid[:-1]
    np.testing.assert_allclose(ratios, ratios[0])
    np.testing.assert_array_equal(r_grid(0.0, 0.1, 5), np.zeros(5))


def test_path_starts_at_zero_and_records_norms(small_data):
    """
    GIVEN a centered dataset
    WHEN the warm-started path is fitted on 30 grid values
    THEN check the first fit is zero, norms have shape (n_r, p) and convergence is tracked
    """
    path = fit_path(small_data, PathOptions(n_r=30))
    assert path.per_r_block_norms.shape == (30, small_data.p)
    assert np.all(path.per_r_block_norms[0] == 0.0)
    assert len(path.converged) == 30
    assert path.converged[0]
    assert path.r_min_feasible is not None
    assert path.fit_at(path.grid[5]) is path.fits[5]


def test_projected_fit_lives_in_projection_space(small_data):
    """
    GIVEN the PCA basis and m = 4
    WHEN the projected estimator is fitted
    THEN check it equals its own projection and its support follows the coordinates
    """
    basis = pca_basis(small_data)
    weights = penalty_weights(small_data, 0.1 * r_max(small_data))
    fit = gpd_fit_projected(small_data, basis, 4, weights, opts=TIGHT)
    assert fit.m == 4
    assert space_norm(project(fit.beta, basis, 4) - fit.beta) <= 1e-10
    coordinates = basis_coordinates(fit.beta, basis, 4)
    blocks = {basis.sigma[k][0] for k in range(4) if coordinates[k] != 0.0}
    assert fit.support == frozenset(blocks)
    assert support(fit.beta, tol=1e-12) <= fit.support


def test_projected_fit_with_full_basis_matches_plain_fit():
    """
    GIVEN vector blocks of full rank
    WHEN the projected estimator uses every basis element
    THEN check it coincides with the unprojected fit
    """
    rng = np.random.default_rng(12)
    space = SpaceSpec((BlockSpec.vector(2), BlockSpec.scalar()))
    x = (rng.normal(size=(40, 2)), rng.normal(size=(40, 1)))
    data = prepare(Dataset(space, x, x[0] @ np.array([1.0, 1.0]) + 0.2 * rng.normal(size=40)))
    basis = pca_basis(data)
    weights = penalty_weights(data, 0.2 * r_max(data))
    plain = gpd_fit(data, weights, opts=TIGHT)
    projected = gpd_fit_projected(data, basis, basis.size, weights, opts=TIGHT)
    assert space_norm(plain.beta - projected.beta) <= 1e-6
    assert plain.support == projected.support


def test_projected_dimension_out_of_range(small_data):
    basis = pca_basis(small_data)
    weights = penalty_weights(small_data, 1.0)
    with pytest.raises(ParameterError):
        gpd_fit_projected(small_data, basis, 0, weights)


def test_projected_path_needs_basis_and_dimension(small_data):
    with pytest.raises(ParameterError):
        fit_path(small_data, PathOptions(n_r=5), m=2)
    basis = pca_basis(small_data)
    path = fit_path(small_data, PathOptions(n_r=5), basis=basis, m=3)
    assert path.m == 3
    assert all(fit.m == 3 for fit in path.fits)
