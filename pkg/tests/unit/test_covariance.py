import numpy as np
import pytest

from flm.covariance import (
    apply_gamma_hat,
    block_scores,
    gram_restriction,
    kappa_n,
    m_max,
    n_n_empirical,
    pca_basis,
    project,
    scores,
)
from flm.errors import ParameterError, SpecMismatchError
from flm.hilbert import design_products, prepare, space_inner, space_norm, support
from flm.solver import penalty_weights
from models import BlockSpec, Coefficient, Dataset, SpaceSpec
from oracles import dense_gram, euclidean_design


def _random_coefficient(space, rng):
    return Coefficient.from_arrays(space, [rng.normal(size=s) for s in space.sizes])


def test_basis_elements_are_orthonormal_within_blocks(small_data):
    """
    GIVEN the PCA basis of a mixed dataset
    WHEN inner products between basis elements are computed
    THEN check they form an orthonormal system
    """
    basis = pca_basis(small_data)
    elements = [basis.element(k) for k in range(basis.size)]
    gram = np.array([[space_inner(a, b) for b in elements] for a in elements])
    np.testing.assert_allclose(gram, np.eye(basis.size), atol=1e-8)


def test_merged_order_is_by_decreasing_eigenvalue(small_data):
    basis = pca_basis(small_data)
    merged = basis.merged_eigenvalues
    assert np.all(np.diff(merged) <= 0)
    assert basis.size <= sum(small_data.space.sizes)


def test_eigen_elements_satisfy_covariance_equation(small_data):
    """
    GIVEN a basis element phi with eigenvalue mu
    WHEN the empirical covariance operator is applied
    THEN check Gamma-hat(phi) = mu phi
    """
    basis = pca_basis(small_data)
    for k in range(min(basis.size, 6)):
        j, index = basis.sigma[k]
        phi = basis.element(k)
        image = apply_gamma_hat(phi, small_data)
        np.testing.assert_allclose(image.arrays[j], basis.eigenvalues[j][index] * phi.arrays[j],
                                   atol=1e-8)


def test_signs_are_deterministic(small_data):
    basis = pca_basis(small_data)
    for elements in basis.eigenvectors:
        for row in elements:
            assert row[np.argmax(np.abs(row))] > 0


def test_zero_block_contributes_nothing():
    rng = np.random.default_rng(1)
    space = SpaceSpec((BlockSpec.vector(2), BlockSpec.scalar()))
    data = prepare(Dataset(space, (rng.normal(size=(10, 2)), np.zeros((10, 1))),
                           rng.normal(size=10)))
    basis = pca_basis(data)
    assert basis.eigenvalues[1].size == 0
    assert all(j == 0 for j, _ in basis.sigma)


def test_projection_is_idempotent_and_nested(small_data):
    """
    GIVEN random coefficients
    WHEN they are projected on the first m basis elements for every m
    THEN check projection is idempotent and supports are nested in m and in beta
    """
    basis = pca_basis(small_data)
    rng = np.random.default_rng(2)
    for _ in range(100):
        beta = _random_coefficient(small_data.space, rng)
        if rng.uniform() < 0.5:
            arrays = beta.arrays
            dropped = int(rng.integers(small_data.p))
            arrays[dropped] = np.zeros_like(arrays[dropped])
            beta = Coefficient.from_arrays(small_data.space, arrays)
        previous = frozenset()
        for m in range(basis.size + 1):
            projected = project(beta, basis, m)
            current = support(projected, tol=1e-12)
            assert previous <= current
            assert current <= support(beta)
            previous = current
        once = project(beta, basis, 3)
        assert space_norm(project(once, basis, 3) - once) <= 1e-10


def test_projection_support_inside_sparse_beta(small_data):
    basis = pca_basis(small_data)
    arrays = [np.zeros(s) for s in small_data.space.sizes]
    arrays[1] = np.array([1.0, -2.0, 0.5])
    beta = Coefficient.from_arrays(small_data.space, arrays)
    for m in range(basis.size + 1):
        assert support(project(beta, basis, m), tol=1e-12) <= frozenset({1})


def test_project_rejects_other_space(small_data):
    basis = pca_basis(small_data)
    other = Coefficient.zeros(SpaceSpec((BlockSpec.scalar(),)))
    with pytest.raises(SpecMismatchError):
        project(other, basis, 1)
    with pytest.raises(ParameterError):
        project(Coefficient.zeros(small_data.space), basis, basis.size + 1)


def test_scores_match_inner_products(small_data):
    basis = pca_basis(small_data)
    z = scores(small_data, basis, 4)
    for k in range(4):
        np.testing.assert_allclose(z[:, k], design_products(small_data, basis.element(k).arrays))
    assert scores(small_data, basis, 0).shape == (small_data.n, 0)


def test_gram_restriction_matches_dense_oracle(small_data):
    basis = pca_basis(small_data)
    m = min(basis.size, 6)
    np.testing.assert_allclose(gram_restriction(small_data, basis, m).matrix,
                               dense_gram(small_data, basis, m), atol=1e-10)


def test_kappa_is_nonincreasing_and_matches_oracle(small_data):
    """
    GIVEN the PCA basis
    WHEN kappa_n is computed for m = 1..M_n
    THEN check it is nonincreasing and equals the dense eigen-decomposition oracle
    """
    basis = pca_basis(small_data)
    upper = m_max(small_data, basis)
    assert 1 <= upper <= small_data.n
    values = [kappa_n(small_data, basis, m) for m in range(1, upper + 1)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    for m, value in zip(range(1, upper + 1), values):
        oracle = np.sqrt(max(np.linalg.eigvalsh(dense_gram(small_data, basis, m))[0], 0.0))
        assert value == pytest.approx(oracle, abs=1e-9)


def test_m_max_never_exceeds_sample_size(make_dataset):
    data = prepare(make_dataset(11, n=6, sizes=(1, 4), curve_points=20))
    basis = pca_basis(data)
    assert m_max(data, basis) <= data.n


def test_n_n_empirical_threshold():
    """
    GIVEN merged eigenvalues on both sides of sqrt(log(n)^3 / n)
    WHEN the empirical N_n is computed
    THEN check only the eigenvalues above the threshold count
    """
    rng = np.random.default_rng(5)
    space = SpaceSpec((BlockSpec.scalar(), BlockSpec.scalar()))
    n = 400
    big = rng.normal(size=(n, 1)) * 3.0
    small = rng.normal(size=(n, 1)) * 0.01
    data = prepare(Dataset(space, (big, small), rng.normal(size=n)))
    basis = pca_basis(data)
    threshold = np.sqrt(np.log(n) ** 3 / n)
    assert basis.merged_eigenvalues[0] > threshold > basis.merged_eigenvalues[1]
    assert n_n_empirical(basis, n) == 1
    assert n_n_empirical(basis, 1) == 0


@pytest.mark.parametrize('level', [0.7, 0.1])
def test_constant_block_gets_no_basis_element(level):
    """
    GIVEN a scalar block whose 50 values are all equal
    WHEN the dataset is prepared and its PCA basis and penalty weights are built
    THEN check the block contributes no basis element and has N_j = 0
    """
    rng = np.random.default_rng(14)
    space = SpaceSpec((BlockSpec.scalar(), BlockSpec.vector(2)))
    data = prepare(Dataset(space, (np.full((50, 1), level), rng.normal(size=(50, 2))),
                           rng.normal(size=50)))
    basis = pca_basis(data)
    assert basis.eigenvalues[0].size == 0
    assert all(j == 1 for j, _ in basis.sigma)
    assert penalty_weights(data, 1.0).n_weights[0] == 0.0


def test_rounding_level_variance_is_not_a_basis_element():
    rng = np.random.default_rng(15)
    space = SpaceSpec((BlockSpec.scalar(), BlockSpec.scalar()))
    residue = 1e-17 * rng.normal(size=(50, 1))
    data = Dataset(space, (residue, rng.normal(size=(50, 1))), rng.normal(size=50))
    basis = pca_basis(data)
    assert basis.eigenvalues[0].size == 0
    assert basis.eigenvalues[1].size == 1


def test_covariance_operator_matches_explicit_gram_matrix(small_data):
    """
    GIVEN random coefficients written in coordinates where block norms are Euclidean
    WHEN the empirical covariance operator is applied
    THEN check it equals multiplication by the assembled (1/n) D^T D to 1e-10
    """
    design, _ = euclidean_design(small_data)
    gram = design.T @ design / small_data.n
    roots = [np.sqrt(spec.weights) for spec in small_data.space.blocks]
    rng = np.random.default_rng(16)
    for _ in range(10):
        beta = _random_coefficient(small_data.space, rng)
        coordinates = np.concatenate([root * values for root, values in zip(roots, beta.arrays)])
        image = apply_gamma_hat(beta, small_data)
        mapped = np.concatenate([root * values for root, values in zip(roots, image.arrays)])
        np.testing.assert_allclose(mapped, gram @ coordinates, rtol=1e-10, atol=1e-10)
    assert space_norm(apply_gamma_hat(Coefficient.zeros(small_data.space), small_data)) == 0.0


def test_covariance_operator_of_one_observation():
    space = SpaceSpec((BlockSpec.vector(2), BlockSpec.scalar()))
    data = Dataset(space, (np.array([[1.0, 2.0]]), np.array([[3.0]])), np.array([0.0]))
    beta = Coefficient.from_arrays(space, [np.array([1.0, 1.0]), np.array([2.0])])
    image = apply_gamma_hat(beta, data)
    # <beta, X_1> = 1 + 2 + 6 = 9
    np.testing.assert_allclose(image.arrays[0], [9.0, 18.0])
    np.testing.assert_allclose(image.arrays[1], [27.0])


def test_m_max_is_one_for_a_single_observation():
    space = SpaceSpec((BlockSpec.vector(2), BlockSpec.scalar()))
    data = Dataset(space, (np.array([[1.0, 2.0]]), np.array([[3.0]])), np.array([1.0]))
    basis = pca_basis(data)
    assert basis.size == 2
    assert m_max(data, basis) == 1


def test_blockwise_eigen_elements_reconstruct_the_data(small_data):
    """
    GIVEN the PCA basis of a dataset with full-rank blocks
    WHEN each X_i^j is expanded on all eigen-elements of its block
    THEN check the expansion reproduces the block to 1e-6 relative
    """
    basis = pca_basis(small_data)
    for block, per_block, elements in zip(small_data.blocks, block_scores(small_data, basis),
                                          basis.eigenvectors):
        rebuilt = per_block @ elements
        assert np.linalg.norm(rebuilt - block) <= 1e-6 * np.linalg.norm(block)


def test_empirical_norm_is_bounded_below_by_kappa(small_data):
    """
    GIVEN random unit-norm elements of span{phi^(1), ..., phi^(m)}
    WHEN their empirical norms ||beta||_n are computed
    THEN check they never fall below kappa_n(m) - 1e-8
    """
    basis = pca_basis(small_data)
    rng = np.random.default_rng(17)
    for m in range(1, m_max(small_data, basis) + 1):
        kappa = kappa_n(small_data, basis, m)
        elements = [basis.element(k) for k in range(m)]
        for _ in range(20):
            weights = rng.normal(size=m)
            weights /= np.linalg.norm(weights)
            beta = sum((float(w) * e for w, e in zip(weights[1:], elements[1:])),
                       float(weights[0]) * elements[0])
            assert space_norm(beta) == pytest.approx(1.0, abs=1e-8)
            empirical = np.sqrt(np.mean(design_products(small_data, beta.arrays) ** 2))
            assert empirical >= kappa - 1e-8


def test_kappa_is_below_root_eigenvalue_for_one_block():
    """
    GIVEN a dataset with a single vector block, where blockwise and joint PCA agree
    WHEN kappa_n is computed for every admissible m
    THEN check kappa_n(m) <= sqrt(mu_m) + 1e-9
    """
    rng = np.random.default_rng(18)
    space = SpaceSpec((BlockSpec.vector(4),))
    x = rng.normal(size=(50, 4)) * np.array([3.0, 2.0, 1.0, 0.5])
    data = prepare(Dataset(space, (x,), rng.normal(size=50)))
    basis = pca_basis(data)
    for m in range(1, m_max(data, basis) + 1):
        assert kappa_n(data, basis, m) <= np.sqrt(basis.merged_eigenvalues[m - 1]) + 1e-9
