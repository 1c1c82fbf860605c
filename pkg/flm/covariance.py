"""Empirical covariance operator, blockwise PCA basis and restricted eigenvalues."""

import logging

import numpy as np
from scipy import linalg

from flm.errors import ParameterError, SpecMismatchError
from flm.hilbert import check_conforms, design_products
from models import BlockKind, Coefficient, GramRestriction, PcaBasis

logger = logging.getLogger(__name__)


def apply_gamma_hat(beta, data):
    """(1/n) sum_i <beta, X_i> X_i."""
    check_conforms(beta, data)
    products = design_products(data, beta.arrays)
    return Coefficient.from_arrays(
        data.space, [block.T @ products / data.n for block in data.blocks]
    )


def _fix_signs(vectors):
    """Flip each row so that its largest-magnitude coordinate is positive."""
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(vectors.shape[0]), pivots])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def _block_eigenpairs(block, spec, tol_rank):
    n = block.shape[0]
    weights = spec.weights
    if spec.kind is BlockKind.CURVE:
        # dual problem on the n x n matrix of inner products
        kernel = (block * weights) @ block.T / n
        values, vectors = linalg.eigh((kernel + kernel.T) / 2.0)
    else:
        covariance = block.T @ block / n
        values, vectors = linalg.eigh((covariance + covariance.T) / 2.0)
    values, vectors = values[::-1], vectors[:, ::-1]
    top = values[0] if values.size and values[0] > 0 else 1.0
    keep = values > max(tol_rank * top, np.finfo(float).eps * n)
    values, vectors = values[keep], vectors[:, keep]
    if spec.kind is BlockKind.CURVE and values.size:
        elements = (block.T @ vectors).T
        norms = np.sqrt(np.einsum('kd,d,kd->k', elements, weights, elements))
        elements = elements / norms[:, None]
    else:
        elements = vectors.T
    return values, _fix_signs(elements)


def pca_basis(data, tol_rank=1e-10):
    """Eigen-elements of every block covariance, merged by decreasing eigenvalue.

    Ties in the merged order are broken by block index, then within-block index.
    """
    eigenvalues, eigenvectors, order = [], [], []
    for j, (block, spec) in enumerate(zip(data.blocks, data.space.blocks)):
        values, elements = _block_eigenpairs(block, spec, tol_rank)
        eigenvalues.append(values)
        eigenvectors.append(elements)
        order.extend((-float(value), j, k) for k, value in enumerate(values))
        if values.size == 0:
            logger.info("block %s has no variance; it contributes no basis elements", spec.name)
    order.sort()
    sigma = tuple((j, k) for _, j, k in order)
    return PcaBasis(data.space, tuple(eigenvalues), tuple(eigenvectors), sigma)


def _check_dimension(m, basis, allow_zero=False):
    low = 0 if allow_zero else 1
    if not low <= m <= basis.size:
        raise ParameterError(f"dimension m={m} outside {low}..{basis.size}")


def block_scores(data, basis):
    """Per block, the (n, K_j) matrix of <X_i^j, e_j^(k)>_j."""
    return [
        block @ (spec.weights * elements).T
        for block, spec, elements in zip(data.blocks, data.space.blocks, basis.eigenvectors)
    ]


def scores(data, basis, m):
    """The (n, m) matrix Z with Z[i, k] = <X_i, phi^(k)>."""
    _check_dimension(m, basis, allow_zero=True)
    per_block = block_scores(data, basis)
    columns = [per_block[j][:, k] for j, k in basis.sigma[:m]]
    if not columns:
        return np.zeros((data.n, 0))
    return np.column_stack(columns)


def project(beta, basis, m):
    """Orthogonal projection of beta onto span{phi^(1), ..., phi^(m)}."""
    _check_dimension(m, basis, allow_zero=True)
    if beta.space != basis.space:
        raise SpecMismatchError("coefficient and basis live in different spaces")
    arrays = [np.zeros(size) for size in beta.space.sizes]
    for j, k in basis.sigma[:m]:
        spec = beta.space.blocks[j]
        element = basis.eigenvectors[j][k]
        arrays[j] += float(np.dot(spec.weights * beta.arrays[j], element)) * element
    return Coefficient.from_arrays(beta.space, arrays)


def gram_restriction(data, basis, m):
    _check_dimension(m, basis)
    z = scores(data, basis, m)
    matrix = z.T @ z / data.n
    return GramRestriction(m, (matrix + matrix.T) / 2.0)


def kappa_n(data, basis, m):
    """Square root of the smallest eigenvalue of the m x m restriction of Gamma-hat."""
    gram = gram_restriction(data, basis, m)
    smallest = linalg.eigvalsh(gram.matrix, subset_by_index=[0, 0])[0]
    return float(np.sqrt(max(smallest, 0.0)))


def m_max(data, basis, tol_rank=1e-10):
    """Largest m whose restriction of Gamma-hat is numerically nonsingular."""
    if basis.size == 0:
        return 0
    full = gram_restriction(data, basis, basis.size).matrix
    for m in range(basis.size, 0, -1):
        values = linalg.eigvalsh(full[:m, :m])
        if values[-1] > 0 and values[0] > tol_rank * values[-1]:
            return m
    return 0


def n_n_empirical(basis, n):
    """max{m <= n : mu_m >= sqrt(log(n)^3 / n)} on the merged empirical eigenvalues."""
    if n < 2:
        return 0
    threshold = np.sqrt(np.log(n) ** 3 / n)
    count = int(np.sum(basis.merged_eigenvalues >= threshold))
    return min(count, n)
