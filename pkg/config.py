import os
from dotenv import load_dotenv

load_dotenv()


def _env_float(name, default):
    value = os.environ.get(name)
    if value is None or value == '':
        return default
    try:
        return float(value)
    except ValueError as exc:
        raise ValueError(f"{name} must be a number, got {value!r}") from exc


def _env_int(name, default):
    value = os.environ.get(name)
    if value is None or value == '':
        return default
    try:
        return int(value)
    except ValueError as exc:
        raise ValueError(f"{name} must be an integer, got {value!r}") from exc


class Config:
    OUT_DIR = os.environ.get('FLM_OUT_DIR') or 'runs'
    SEED = _env_int('FLM_SEED', 0)
    THREADS = _env_int('FLM_THREADS', os.cpu_count() or 1)
    LOG_LEVEL = os.environ.get('FLM_LOG_LEVEL') or 'INFO'

    # solver
    TOL = _env_float('FLM_TOL', 1e-8)
    MAX_ITER = _env_int('FLM_MAX_ITER', 10000)
    KKT_FACTOR = _env_float('FLM_KKT_FACTOR', 1e-6)
    RECOMPUTE_EVERY = _env_int('FLM_RECOMPUTE_EVERY', 100)

    # path and selection
    PATH_DELTA = _env_float('FLM_PATH_DELTA', 0.001)
    PATH_N_R = _env_int('FLM_PATH_N_R', 100)
    KAPPA_PEN = _env_float('FLM_KAPPA_PEN', 2.0)
    ALPHA = _env_float('FLM_ALPHA', 0.05)
    CV_FOLDS = _env_int('FLM_CV_FOLDS', 5)
    TOL_RANK = _env_float('FLM_TOL_RANK', 1e-10)
    DIM_CAP = os.environ.get('FLM_DIM_CAP') or 'rank'

    # debias
    DEBIAS_MAX_STEPS = _env_int('FLM_DEBIAS_MAX_STEPS', 100000)
    DEBIAS_SCHEDULE = os.environ.get('FLM_DEBIAS_SCHEDULE') or 'harmonic'
    RHO_MIN = _env_float('FLM_RHO_MIN', 1e-6)
    RHO_MAX = _env_float('FLM_RHO_MAX', 10.0)
    RHO_N = _env_int('FLM_RHO_N', 20)

    # data
    GRID_SIZE = _env_int('FLM_GRID_SIZE', 100)
    ENERGY_CSV = os.environ.get('FLM_ENERGY_CSV') or 'data/energydata_complete.csv'


class TestingConfig(Config):
    THREADS = 1
    LOG_LEVEL = 'WARNING'
    PATH_N_R = 30
    DEBIAS_MAX_STEPS = 20000
    RHO_N = 8
    GRID_SIZE = 50
