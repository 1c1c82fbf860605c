"""Dataset persistence (JSON manifest + CSV payload) and the appliances-energy pipeline."""

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from flm.errors import DatasetParseError, ParameterError
from flm.hilbert import prepare
from models import (
    DATASET_FORMAT_VERSION,
    BlockKind,
    BlockSpec,
    CenteringMeta,
    Coefficient,
    Dataset,
    DatasetManifest,
    SpaceSpec,
)

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def block_columns(spec):
    """Payload column names of one block."""
    if spec.kind is BlockKind.CURVE:
        return [f'{spec.name}__t{k}' for k in range(spec.size)]
    if spec.kind is BlockKind.VECTOR:
        return [f'{spec.name}__{k}' for k in range(spec.size)]
    return [spec.name]


def _frame(space, arrays_by_block):
    columns = {}
    for spec, values in zip(space.blocks, arrays_by_block):
        values = np.atleast_2d(values)
        for k, name in enumerate(block_columns(spec)):
            columns[name] = values[:, k]
    return pd.DataFrame(columns)


def _spec_from_descriptor(descriptor, index):
    try:
        kind = BlockKind(descriptor['kind'])
        name = descriptor['name']
    except (KeyError, ValueError) as exc:
        raise DatasetParseError(f"block descriptor {index + 1} is malformed: {exc}") from exc
    try:
        if kind is BlockKind.CURVE:
            return BlockSpec.curve(descriptor['grid'], name)
        if kind is BlockKind.VECTOR:
            return BlockSpec.vector(descriptor['dim'], name)
        return BlockSpec.scalar(name)
    except (KeyError, ParameterError) as exc:
        raise DatasetParseError(f"block {name!r} is malformed: {exc}") from exc


def _numeric_column(frame, column):
    cells = frame[column]
    try:
        values = cells.astype(float).to_numpy()
    except ValueError:
        for row, cell in enumerate(cells, start=1):
            try:
                float(cell)
            except ValueError:
                raise DatasetParseError(f"non-numeric cell {cell!r}", row=row,
                                        column=column) from None
        raise
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise DatasetParseError("non-finite cell", row=int(bad[0]) + 1, column=column)
    return values


def read_manifest(manifest_path):
    manifest_path = Path(manifest_path)
    try:
        raw = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetParseError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    version = raw.get('version')
    if version != DATASET_FORMAT_VERSION:
        raise DatasetParseError(
            f"unsupported manifest version {version!r}, expected {DATASET_FORMAT_VERSION}"
        )
    for key in ('blocks', 'response', 'n', 'payload'):
        if key not in raw:
            raise DatasetParseError(f"manifest is missing {key!r}")
    return DatasetManifest(blocks=raw['blocks'], response=raw['response'], n=int(raw['n']),
                           payload=raw['payload'], version=version)


def load_dataset(manifest_path):
    """Read a dataset; the result is not centered."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    space = SpaceSpec(tuple(
        _spec_from_descriptor(d, index) for index, d in enumerate(manifest.blocks)
    ))
    payload = manifest_path.parent / manifest.payload
    frame = pd.read_csv(payload, dtype=str, keep_default_na=False)
    if len(frame) != manifest.n:
        raise DatasetParseError(
            f"payload has {len(frame)} rows, manifest declares n={manifest.n}"
        )
    for column in [manifest.response] + [c for s in space.blocks for c in block_columns(s)]:
        if column not in frame.columns:
            raise DatasetParseError("declared column is absent from the payload", column=column)
    blocks = [
        np.column_stack([_numeric_column(frame, c) for c in block_columns(spec)])
        for spec in space.blocks
    ]
    y = _numeric_column(frame, manifest.response)
    logger.info("loaded %s: n=%d, p=%d", payload, len(frame), space.p)
    return Dataset(space, tuple(blocks), y)


def save_dataset(data, manifest_path, response='y'):
    """Write ``<name>.json`` (manifest) and ``<name>.csv`` (payload) side by side."""
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    payload = manifest_path.with_suffix('.csv')
    frame = _frame(data.space, data.blocks)
    if response in frame.columns:
        raise ParameterError(f"response name {response!r} clashes with a block column")
    frame[response] = data.y
    frame.to_csv(payload, index=False, float_format=FLOAT_FORMAT)
    descriptors = []
    for spec in data.space.blocks:
        descriptor = spec.to_dict()
        descriptor['columns'] = block_columns(spec)
        descriptors.append(descriptor)
    manifest = DatasetManifest(blocks=descriptors, response=response, n=data.n,
                               payload=payload.name)
    manifest_path.write_text(json.dumps(manifest.to_dict(), indent=2))
    return manifest_path, payload


def save_coefficient(beta, path):
    """One-row CSV with the dataset column naming."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _frame(beta.space, [values[None, :] for values in beta.arrays]).to_csv(
        path, index=False, float_format=FLOAT_FORMAT
    )
    return path


def load_coefficient(path, space):
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if len(frame) != 1:
        raise DatasetParseError(f"coefficient file {path} must hold exactly one row")
    arrays = []
    for spec in space.blocks:
        for column in block_columns(spec):
            if column not in frame.columns:
                raise DatasetParseError("coefficient column is absent", column=column)
        arrays.append(np.array([_numeric_column(frame, c)[0] for c in block_columns(spec)]))
    return Coefficient.from_arrays(space, arrays)


def coefficient_frame(beta, blocks=None, **labels):
    """Long format (block, name, t, value) of the chosen blocks, for plotting."""
    rows = []
    chosen = range(beta.space.p) if blocks is None else sorted(blocks)
    for j in chosen:
        spec = beta.space.blocks[j]
        positions = spec.grid if spec.kind is BlockKind.CURVE else np.arange(spec.size)
        for t, value in zip(positions, beta.arrays[j]):
            rows.append({**labels, 'block': j + 1, 'name': spec.name, 't': float(t),
                         'value': float(value)})
    return pd.DataFrame(rows, columns=[*labels, 'block', 'name', 't', 'value'])


def split_curve_block(data, block, n_pieces):
    """Replace a curve block by ``n_pieces`` blocks on consecutive parts of its grid."""
    spec = data.space.blocks[block]
    if spec.kind is not BlockKind.CURVE:
        raise ParameterError(f"block {spec.name} is not a curve")
    pieces = np.array_split(np.arange(spec.size), n_pieces)
    if n_pieces < 1 or any(piece.size < 2 for piece in pieces):
        raise ParameterError(
            f"cannot split {spec.size} grid points into {n_pieces} pieces of two or more"
        )
    specs = list(data.space.blocks)
    arrays = list(data.blocks)
    new_specs = [BlockSpec.curve(spec.grid[piece], f'{spec.name}[{k + 1}]')
                 for k, piece in enumerate(pieces)]
    new_arrays = [arrays[block][:, piece] for piece in pieces]
    specs[block:block + 1] = new_specs
    arrays[block:block + 1] = new_arrays
    meta = None
    if data.meta is not None:
        means = list(data.meta.block_means)
        means[block:block + 1] = [means[block][piece] for piece in pieces]
        meta = CenteringMeta(tuple(means), data.meta.y_mean)
    return Dataset(SpaceSpec(tuple(specs)), tuple(arrays), data.y, meta)


def _require_columns(frame, columns, path):
    for column in columns:
        if column not in frame.columns:
            raise DatasetParseError(f"{path} has no such column", column=column)


def energy_curves(config):
    """Daily curves of the appliances-energy file, divided by their global range.

    Covariate day d pairs with log(mean Appliances on day d + 1). Days missing
    any sampling slot are dropped as covariate days.
    """
    path = Path(config.raw_csv_path)
    if not path.exists():
        raise FileNotFoundError(f"energy file not found: {path}")
    frame = pd.read_csv(path)
    variables = list(config.variables)
    _require_columns(frame, [config.date_column, config.response, *variables], path)
    stamps = pd.to_datetime(frame[config.date_column], format='%Y-%m-%d %H:%M:%S',
                            errors='coerce')
    bad = np.flatnonzero(stamps.isna().to_numpy())
    if bad.size:
        raise DatasetParseError("malformed timestamp", row=int(bad[0]) + 1,
                                column=config.date_column)
    minutes_per_slot = 24 * 60 // config.samples_per_day
    frame = frame.assign(
        _day=stamps.dt.normalize(),
        _slot=(stamps.dt.hour * 60 + stamps.dt.minute) // minutes_per_slot,
    )
    duplicated = frame.duplicated(['_day', '_slot'])
    if duplicated.any():
        logger.warning("dropping %d duplicated sampling slots", int(duplicated.sum()))
        frame = frame[~duplicated]

    wide = frame.set_index(['_day', '_slot'])[variables].unstack('_slot')
    wide = wide.reindex(columns=pd.MultiIndex.from_product(
        [variables, range(config.samples_per_day)]
    ))
    complete = wide.dropna().index
    daily_response = frame.groupby('_day')[config.response].mean()
    days = [day for day in complete if day + pd.Timedelta(days=1) in daily_response.index]
    dropped = len(wide.index) - len(complete)
    logger.info("energy data: %d complete days, %d incomplete dropped, %d usable pairs",
                len(complete), dropped, len(days))
    if len(days) < 2:
        raise DatasetParseError(f"{path} holds fewer than two usable days")

    grid = np.linspace(0.0, 1.0, config.samples_per_day)
    specs, blocks = [], []
    for name in variables:
        curves = wide[name].loc[days].to_numpy(dtype=float)
        spread = float(curves.max() - curves.min())
        if spread > 0:
            curves = curves / spread
        else:
            logger.warning("variable %s is constant; it is left unscaled", name)
        specs.append(BlockSpec.curve(grid, name))
        blocks.append(curves)
    next_days = [day + pd.Timedelta(days=1) for day in days]
    y = np.log(daily_response.loc[next_days].to_numpy(dtype=float))
    return Dataset(SpaceSpec(tuple(specs)), tuple(blocks), y)


def prepare_energy(config):
    return prepare(energy_curves(config))
