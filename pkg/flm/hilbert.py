"""Inner products, norms and centering on the product space H = H_1 x ... x H_p."""

import logging

import numpy as np
from scipy.integrate import trapezoid

from flm.errors import ParameterError, SpecMismatchError
from models import BlockKind, CenteringMeta, Coefficient, Dataset

logger = logging.getLogger(__name__)


def block_inner(f, g):
    """<f, g>_j for two elements of the same block space."""
    if f.spec != g.spec:
        raise SpecMismatchError(
            f"cannot pair a {f.spec.kind.value} element with a {g.spec.kind.value} element"
        )
    if f.spec.kind is BlockKind.CURVE:
        return float(trapezoid(f.values * g.values, f.spec.grid))
    return float(np.dot(f.values, g.values))


def block_norm(f):
    return float(np.sqrt(max(block_inner(f, f), 0.0)))


def space_inner(a, b):
    if a.space != b.space:
        raise SpecMismatchError("coefficients live in different spaces")
    return float(sum(block_inner(f, g) for f, g in zip(a.blocks, b.blocks)))


def space_norm(a):
    return float(np.sqrt(max(space_inner(a, a), 0.0)))


def zero_coefficient(space):
    return Coefficient.zeros(space)


def weighted_norms(space, arrays):
    """Block norms of raw block arrays, using each block's quadrature weights."""
    return np.array([
        np.sqrt(max(float(np.dot(spec.weights * values, values)), 0.0))
        for spec, values in zip(space.blocks, arrays)
    ])


def coefficient_norms(beta):
    return weighted_norms(beta.space, beta.arrays)


def support(beta, tol=0.0):
    """Indices j (0-based) with ||beta_j||_j > tol."""
    return frozenset(int(j) for j in np.flatnonzero(coefficient_norms(beta) > tol))


def check_conforms(beta, data):
    if beta.space != data.space:
        raise SpecMismatchError("coefficient does not live in the dataset's space")


def design_products(data, arrays):
    """Vector of <beta, X_i> for every observation, beta given as raw block arrays."""
    out = np.zeros(data.n)
    for spec, block, values in zip(data.space.blocks, data.blocks, arrays):
        out += block @ (spec.weights * values)
    return out


def predict(beta, data):
    """<beta, X_i> for every row, on the response's original scale when centered."""
    check_conforms(beta, data)
    fitted = design_products(data, beta.arrays)
    if data.meta is not None:
        fitted = fitted + data.meta.y_mean
    return fitted


def _center(values, mean):
    """values - mean, with columns that never vary set to exactly zero."""
    centered = values - mean
    constant = np.ptp(values, axis=0) == 0
    if np.ndim(centered) == 1:
        return np.zeros_like(centered) if constant else centered
    centered[:, constant] = 0.0
    return centered


def prepare(raw):
    """Center every block and the response; record the means for prediction."""
    if raw.n < 2:
        raise ParameterError("centering needs at least two observations")
    means = [block.mean(axis=0) for block in raw.blocks]
    y_mean = float(raw.y.mean())
    blocks = [_center(block, mean) for block, mean in zip(raw.blocks, means)]
    y = _center(raw.y, y_mean)
    if raw.meta is not None:
        means = [old + new for old, new in zip(raw.meta.block_means, means)]
        y_mean += raw.meta.y_mean
    meta = CenteringMeta(tuple(np.asarray(m, dtype=float) for m in means), y_mean)
    logger.debug("centered dataset with n=%d, p=%d", raw.n, raw.p)
    return Dataset(raw.space, tuple(blocks), y, meta)


def center_with(raw, meta):
    """Center another dataset with means computed elsewhere (held-out folds)."""
    if len(meta.block_means) != raw.p:
        raise SpecMismatchError("centering record does not match the dataset")
    blocks = [block - mean for block, mean in zip(raw.blocks, meta.block_means)]
    return Dataset(raw.space, tuple(blocks), raw.y - meta.y_mean, meta)
