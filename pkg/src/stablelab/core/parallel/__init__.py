"""
Worker pools and the ordered fan-out used by every estimator.
"""

from __future__ import annotations

import logging
from typing import Callable, List, Sequence, TypeVar

from stablelab.core.parallel.process_pool import Pool
from stablelab.core.parallel.thread_pool import ThreadPool
from stablelab.exceptions import ParameterError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

MODES = ("process", "thread")


def run_ordered(
    fn: Callable[[T], R],
    tasks: Sequence[T],
    workers: int = 1,
    mode: str = "process",
) -> List[R]:
    """
    Run ``fn`` over ``tasks`` and return the results in task order.

    With one worker (or one task) everything runs inline, so the serial path
    and the pooled path execute the same function on the same inputs.
    """
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    if mode not in MODES:
        raise ParameterError(f"unknown parallel mode {mode!r}")
    tasks = list(tasks)
    if workers == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    n = min(workers, len(tasks))
    logger.debug("dispatching %d tasks to %d %s workers", len(tasks), n, mode)
    if mode == "process":
        with Pool(processes=n) as pool:
            return pool.map_ordered(fn, tasks)
    with ThreadPool(max_workers=n) as pool:
        return pool.map_ordered(fn, tasks)


__all__ = ["Pool", "ThreadPool", "run_ordered", "MODES"]
