"""Ordered job runner for slab assembly and per-level studies.

Results always come back in submission order, so a run with `jobs > 1`
writes the same artifacts as a serial one.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar


logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def _job_id(kind: str, index: int) -> str:
    return f"{kind}_{index:04d}"


def run_ordered(func: Callable[[T], R], items: Sequence[T], jobs: int = 1, kind: str = 'job') -> List[R]:
    """Apply `func` to every item and return the results in item order.

    An exception in any job is logged with its job id and re-raised after the
    pool shuts down.
    """
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    items = list(items)

    def wrapped(pair):
        index, item = pair
        job_id = _job_id(kind, index)
        started = time.perf_counter()
        try:
            return func(item)
        except Exception as exc:
            logger.error("[RUN] Error in %s: %s", job_id, exc)
            raise
        finally:
            logger.debug("[RUN] %s took %.3fs", job_id, time.perf_counter() - started)

    if jobs == 1 or len(items) <= 1:
        return [wrapped(pair) for pair in enumerate(items)]
    logger.debug("[RUN] %d %s jobs on %d workers", len(items), kind, jobs)
    with ThreadPoolExecutor(max_workers=jobs, thread_name_prefix=kind) as pool:
        return list(pool.map(wrapped, enumerate(items)))
