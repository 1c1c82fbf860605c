import json
import logging
import sys
from functools import wraps
from pathlib import Path

import click
import numpy as np

from flm.errors import FlmError
from models import RunReport

logger = logging.getLogger(__name__)


def report_errors(f):
    """Decorator turning library and I/O failures into one stderr line and exit code 1."""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except FlmError as exc:
            click.echo(f"error: {exc.kind}: {exc}", err=True)
        except OSError as exc:
            click.echo(f"error: io: {exc}", err=True)
        sys.exit(1)
    return decorated_function


def config_echo(settings):
    """Every effective setting of a Config class, for the run report."""
    return {name: getattr(settings, name) for name in dir(settings) if name.isupper()}


def out_path(settings, name):
    path = Path(settings.OUT_DIR) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (set, frozenset, tuple, np.ndarray)):
        return list(value)
    return str(value)


def write_report(settings, command, seed=None, timings=None, outputs=(), metrics=None,
                 flags=None):
    """Write ``<command>_report.json`` and return its path; outputs are listed as strings."""
    path = out_path(settings, f'{command}_report.json')
    report = RunReport(
        command=command,
        config={**config_echo(settings), **(flags or {})},
        seed=seed,
        timings=timings or {},
        outputs=[str(output) for output in outputs] + [str(path)],
        metrics=metrics or {},
    )
    path.write_text(json.dumps(report.to_dict(), indent=2, default=_jsonable))
    logger.info("wrote %s", path)
    return path


def parse_project(ctx, param, value):
    """click callback: 'auto', a positive integer, or nothing."""
    if value is None or value == 'none':
        return None
    if value == 'auto':
        return 'auto'
    try:
        m = int(value)
    except ValueError:
        raise click.BadParameter("expected 'auto' or a positive integer") from None
    if m < 1:
        raise click.BadParameter("the dimension must be at least 1")
    return m
