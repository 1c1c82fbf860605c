import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

logger = logging.getLogger(__name__)


def map_ordered(fn, items, n_jobs=1):
    """Apply fn to every item, concurrently when n_jobs > 1, results in input order."""
    items = list(items)
    if n_jobs is None or n_jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(n_jobs, len(items))) as executor:
        return list(executor.map(fn, items))


@contextmanager
def timed(timings, phase):
    """Record the wall-clock duration of a block under ``timings[phase]``."""
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[phase] = round(time.perf_counter() - start, 6)
        logger.debug("%s took %.3fs", phase, timings[phase])
