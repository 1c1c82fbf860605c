from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np

from flm.errors import ParameterError, SpecMismatchError


def _readonly(values):
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


class BlockKind(str, Enum):
    CURVE = 'curve'
    VECTOR = 'vector'
    SCALAR = 'scalar'


@dataclass(frozen=True, eq=False)
class BlockSpec:
    """The Hilbert space H_j housing one covariate block."""

    kind: BlockKind
    grid: Optional[np.ndarray] = None
    dim: Optional[int] = None
    name: str = ''

    def __post_init__(self):
        kind = BlockKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        if kind is BlockKind.CURVE:
            if self.grid is None:
                raise ParameterError("curve block requires a grid")
            grid = _readonly(self.grid).ravel()
            if grid.size < 2:
                raise ParameterError("curve grid needs at least two points")
            if not np.all(np.isfinite(grid)) or np.any(np.diff(grid) <= 0):
                raise ParameterError("curve grid must be finite and strictly increasing")
            object.__setattr__(self, 'grid', grid)
            object.__setattr__(self, 'dim', None)
        elif kind is BlockKind.VECTOR:
            if self.dim is None or int(self.dim) < 1:
                raise ParameterError("vector block requires dim >= 1")
            object.__setattr__(self, 'dim', int(self.dim))
            object.__setattr__(self, 'grid', None)
        else:
            object.__setattr__(self, 'dim', None)
            object.__setattr__(self, 'grid', None)

    @classmethod
    def curve(cls, grid, name=''):
        return cls(BlockKind.CURVE, grid=grid, name=name)

    @classmethod
    def vector(cls, dim, name=''):
        return cls(BlockKind.VECTOR, dim=dim, name=name)

    @classmethod
    def scalar(cls, name=''):
        return cls(BlockKind.SCALAR, name=name)

    @property
    def size(self):
        """Number of stored values for one element of this block."""
        if self.kind is BlockKind.CURVE:
            return int(self.grid.size)
        if self.kind is BlockKind.VECTOR:
            return self.dim
        return 1

    @cached_property
    def weights(self):
        """Quadrature weights w such that <f, g> = sum(w * f * g).

        Trapezoid weights on the grid for curves, ones otherwise.
        """
        if self.kind is not BlockKind.CURVE:
            return _readonly(np.ones(self.size))
        steps = np.diff(self.grid)
        w = np.zeros(self.grid.size)
        w[:-1] += steps / 2.0
        w[1:] += steps / 2.0
        return _readonly(w)

    def __eq__(self, other):
        if not isinstance(other, BlockSpec):
            return NotImplemented
        if self.kind is not other.kind or self.size != other.size:
            return False
        if self.kind is BlockKind.CURVE:
            return bool(np.array_equal(self.grid, other.grid))
        return True

    def __hash__(self):
        return hash((self.kind, self.size))

    def to_dict(self):
        data = {'name': self.name, 'kind': self.kind.value}
        if self.kind is BlockKind.CURVE:
            data['grid'] = self.grid.tolist()
        elif self.kind is BlockKind.VECTOR:
            data['dim'] = self.dim
        return data


@dataclass(frozen=True, eq=False)
class SpaceSpec:
    """The product space H = H_1 x ... x H_p."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise ParameterError("a space needs at least one block")
        named = tuple(
            spec if spec.name else BlockSpec(spec.kind, spec.grid, spec.dim, f'X{j + 1}')
            for j, spec in enumerate(blocks)
        )
        object.__setattr__(self, 'blocks', named)

    @property
    def p(self):
        return len(self.blocks)

    @property
    def names(self):
        return [spec.name for spec in self.blocks]

    @property
    def sizes(self):
        return [spec.size for spec in self.blocks]

    def __eq__(self, other):
        if not isinstance(other, SpaceSpec):
            return NotImplemented
        return self.p == other.p and all(a == b for a, b in zip(self.blocks, other.blocks))

    def __hash__(self):
        return hash(tuple(self.blocks))

    def __iter__(self):
        return iter(self.blocks)

    def __getitem__(self, j):
        return self.blocks[j]

    def to_dict(self):
        return {'blocks': [spec.to_dict() for spec in self.blocks]}


@dataclass(frozen=True, eq=False)
class BlockElement:
    """One element of H_j stored as its raw values."""

    spec: BlockSpec
    values: np.ndarray

    def __post_init__(self):
        values = _readonly(np.atleast_1d(np.asarray(self.values, dtype=float))).ravel()
        if values.size != self.spec.size:
            raise SpecMismatchError(
                f"block {self.spec.name or self.spec.kind.value} expects {self.spec.size} "
                f"values, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ParameterError("block values must be finite")
        object.__setattr__(self, 'values', values)


@dataclass(frozen=True, eq=False)
class Coefficient:
    """An element beta = (beta_1, ..., beta_p) of H."""

    space: SpaceSpec
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if len(blocks) != self.space.p:
            raise SpecMismatchError(
                f"coefficient has {len(blocks)} blocks, space has {self.space.p}"
            )
        for j, (element, spec) in enumerate(zip(blocks, self.space.blocks)):
            if element.spec != spec:
                raise SpecMismatchError(f"block {j + 1} does not match its space")
        object.__setattr__(self, 'blocks', blocks)

    @classmethod
    def from_arrays(cls, space, arrays):
        arrays = list(arrays)
        if len(arrays) != space.p:
            raise SpecMismatchError(f"expected {space.p} blocks, got {len(arrays)}")
        return cls(space, tuple(BlockElement(spec, a) for spec, a in zip(space.blocks, arrays)))

    @classmethod
    def zeros(cls, space):
        return cls.from_arrays(space, [np.zeros(size) for size in space.sizes])

    @property
    def arrays(self):
        return [element.values for element in self.blocks]

    def _combine(self, other, op):
        if not isinstance(other, Coefficient):
            return NotImplemented
        if self.space != other.space:
            raise SpecMismatchError("coefficients live in different spaces")
        return Coefficient.from_arrays(
            self.space, [op(a, b) for a, b in zip(self.arrays, other.arrays)]
        )

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        if isinstance(scalar, Coefficient):
            return NotImplemented
        return Coefficient.from_arrays(self.space, [float(scalar) * a for a in self.arrays])

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def to_dict(self):
        return {
            spec.name: element.values.tolist()
            for spec, element in zip(self.space.blocks, self.blocks)
        }


@dataclass(frozen=True)
class CenteringMeta:
    block_means: tuple
    y_mean: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """n observations of p covariate blocks and a real response.

    Block j is stored as an (n, size_j) array; row i is X_i^j.
    """

    space: SpaceSpec
    blocks: tuple
    y: np.ndarray
    meta: Optional[CenteringMeta] = None

    def __post_init__(self):
        y = _readonly(np.asarray(self.y, dtype=float)).ravel()
        if y.size < 1:
            raise ParameterError("a dataset needs at least one observation")
        if len(self.blocks) != self.space.p:
            raise SpecMismatchError(
                f"dataset has {len(self.blocks)} blocks, space has {self.space.p}"
            )
        blocks = []
        for j, (values, spec) in enumerate(zip(self.blocks, self.space.blocks)):
            array = np.array(values, dtype=float)
            if array.ndim == 1:
                array = array.reshape(-1, 1)
            if array.ndim != 2 or array.shape[0] != y.size:
                raise SpecMismatchError(
                    f"block {spec.name} has shape {array.shape}, expected {y.size} rows"
                )
            if array.shape[1] != spec.size:
                raise SpecMismatchError(
                    f"block {spec.name} rows have {array.shape[1]} values, expected {spec.size}"
                )
            if not np.all(np.isfinite(array)):
                raise ParameterError(f"block {spec.name} contains non-finite values")
            array.setflags(write=False)
            blocks.append(array)
        if not np.all(np.isfinite(y)):
            raise ParameterError("response contains non-finite values")
        object.__setattr__(self, 'blocks', tuple(blocks))
        object.__setattr__(self, 'y', y)

    @property
    def n(self):
        return int(self.y.size)

    @property
    def p(self):
        return self.space.p

    def row(self, i):
        return [BlockElement(spec, block[i]) for spec, block in zip(self.space.blocks, self.blocks)]

    def subset(self, indices):
        indices = np.asarray(indices, dtype=int)
        return Dataset(
            self.space, tuple(block[indices] for block in self.blocks), self.y[indices], self.meta
        )

    def with_blocks(self, blocks, y=None, meta=None):
        return Dataset(self.space, tuple(blocks), self.y if y is None else y, meta)

    def to_dict(self):
        return {'n': self.n, 'p': self.p, 'space': self.space.to_dict(),
                'centered': self.meta is not None}


@dataclass(frozen=True, eq=False)
class PcaBasis:
    """Blockwise eigen-elements of the empirical covariance with a global order.

    ``eigenvectors[j]`` has one eigen-element per row; ``sigma[k]`` is the
    (block, index) pair of the k-th global element phi^(k).
    """

    space: SpaceSpec
    eigenvalues: tuple
    eigenvectors: tuple
    sigma: tuple

    @property
    def size(self):
        return len(self.sigma)

    @cached_property
    def merged_eigenvalues(self):
        return _readonly([self.eigenvalues[j][k] for j, k in self.sigma])

    def groups(self, m):
        """Positions k < m of the global basis, grouped by block."""
        groups = [[] for _ in range(self.space.p)]
        for position, (j, _) in enumerate(self.sigma[:m]):
            groups[j].append(position)
        return groups

    def element(self, k):
        j, index = self.sigma[k]
        arrays = [np.zeros(size) for size in self.space.sizes]
        arrays[j] = self.eigenvectors[j][index]
        return Coefficient.from_arrays(self.space, arrays)

    def to_dict(self):
        return {
            'size': self.size,
            'per_block': [int(values.size) for values in self.eigenvalues],
            'merged_eigenvalues': self.merged_eigenvalues.tolist(),
        }


@dataclass(frozen=True, eq=False)
class GramRestriction:
    m: int
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class PenaltyWeights:
    r: float
    lambdas: np.ndarray
    n_weights: np.ndarray

    def to_dict(self):
        return {'r': self.r, 'lambdas': self.lambdas.tolist(),
                'n_weights': self.n_weights.tolist()}


@dataclass(frozen=True, eq=False)
class FitResult:
    beta: Coefficient
    support: frozenset
    objective: float
    n_iterations: int
    converged: bool
    kkt_gap: float
    weights: Optional[PenaltyWeights] = None
    m: Optional[int] = None

    def to_dict(self):
        return {
            'support': sorted(j + 1 for j in self.support),
            'support_names': [self.beta.space.names[j] for j in sorted(self.support)],
            'objective': self.objective,
            'n_iterations': self.n_iterations,
            'converged': self.converged,
            'kkt_gap': self.kkt_gap,
            'r': None if self.weights is None else self.weights.r,
            'm': self.m,
        }


@dataclass(frozen=True, eq=False)
class PathResult:
    """Fits along a decreasing grid; ``per_r_block_norms`` is (n_r, p)."""

    grid: np.ndarray
    fits: tuple
    per_r_block_norms: np.ndarray
    r_min_feasible: Optional[float]
    m: Optional[int] = None

    @property
    def converged(self):
        return [fit.converged for fit in self.fits]

    def fit_at(self, r):
        index = int(np.argmin(np.abs(self.grid - r)))
        return self.fits[index]

    def to_dict(self):
        return {
            'n_r': int(self.grid.size),
            'r_max': float(self.grid[0]),
            'r_min': float(self.grid[-1]),
            'r_min_feasible': self.r_min_feasible,
            'n_converged': int(sum(self.converged)),
            'm': self.m,
        }


@dataclass(frozen=True, eq=False)
class SelectionReport:
    method: str
    chosen_r: float
    score_table: list
    kappa_pen: float
    sigma_hat2: Optional[float] = None
    chosen_m: Optional[int] = None
    fit: Optional[FitResult] = None
    refit_r: Optional[float] = None

    def to_dict(self):
        return {
            'method': self.method,
            'chosen_r': self.chosen_r,
            'refit_r': self.refit_r,
            'sigma_hat2': self.sigma_hat2,
            'chosen_m': self.chosen_m,
            'kappa_pen': self.kappa_pen,
        }


@dataclass(frozen=True, eq=False)
class DimensionReport:
    chosen_m: int
    score_table: list
    fit: FitResult
    cap: str
    upper: int

    def to_dict(self):
        return {'chosen_m': self.chosen_m, 'cap': self.cap, 'upper': self.upper}


@dataclass(frozen=True, eq=False)
class DebiasResult:
    beta_tilde: Coefficient
    rho: float
    n_steps: int
    gradient_norm: float
    alpha1: float
    converged: bool = False

    def to_dict(self):
        return {
            'rho': self.rho,
            'n_steps': self.n_steps,
            'gradient_norm': self.gradient_norm,
            'alpha1': self.alpha1,
            'converged': self.converged,
        }


@dataclass(frozen=True)
class SimConfig:
    example: int = 1
    n: int = 1000
    sigma: float = 0.01
    grid_size: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.example not in (0, 1, 2):
            raise ParameterError(f"example must be 0, 1 or 2, got {self.example}")
        if self.n < 2:
            raise ParameterError("n must be at least 2")
        if self.sigma < 0:
            raise ParameterError("sigma must be nonnegative")
        if self.grid_size < 2:
            raise ParameterError("grid_size must be at least 2")

    def to_dict(self):
        return {'example': self.example, 'n': self.n, 'sigma': self.sigma,
                'grid_size': self.grid_size, 'seed': self.seed}


DATASET_FORMAT_VERSION = 'flm-dataset/1'


@dataclass(frozen=True)
class DatasetManifest:
    blocks: list
    response: str
    n: int
    payload: str
    version: str = DATASET_FORMAT_VERSION

    def to_dict(self):
        return {'version': self.version, 'n': self.n, 'response': self.response,
                'payload': self.payload, 'blocks': self.blocks}


ENERGY_VARIABLES = (
    'Appliances', 'lights',
    'T1', 'RH_1', 'T2', 'RH_2', 'T3', 'RH_3', 'T4', 'RH_4', 'T5', 'RH_5',
    'T6', 'RH_6', 'T7', 'RH_7', 'T8', 'RH_8', 'T9', 'RH_9',
    'T_out', 'Press_mm_hg', 'RH_out', 'Windspeed',
)


@dataclass(frozen=True)
class EnergyConfig:
    raw_csv_path: str
    samples_per_day: int = 144
    variables: tuple = ENERGY_VARIABLES
    response: str = 'Appliances'
    date_column: str = 'date'


@dataclass
class RunReport:
    command: str
    config: dict
    seed: Optional[int] = None
    timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            'command': self.command,
            'config': self.config,
            'seed': self.seed,
            'timings': self.timings,
            'outputs': self.outputs,
            'metrics': self.metrics,
        }
