"""
Process pool for stablelab.

A context-managed ``ProcessPoolExecutor`` over a ``spawn`` context. Walk
batches, quadrature strata and tuple blocks are submitted as top-level
functions with picklable arguments.
"""
from collections.abc import Sized
from concurrent.futures import ProcessPoolExecutor
from contextlib import AbstractContextManager
from multiprocessing import cpu_count, get_context
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar

T = TypeVar('T')
R = TypeVar('R')


class Pool(ProcessPoolExecutor, AbstractContextManager):
    """
    A context-managed process pool whose map keeps task order.
    """

    def __init__(
        self,
        processes: Optional[int] = None,
        initializer: Optional[Callable[..., Any]] = None,
        initargs: Tuple[Any, ...] = (),
        start_method: str = 'spawn'
    ):
        """
        :param processes: Number of worker processes. Defaults to the number of CPU cores.
        :param initializer: A callable invoked by each worker process when it starts.
        :param initargs: A tuple of arguments passed to the initializer.
        :param start_method: 'spawn', 'fork' or 'forkserver'. Workers never inherit
            random state from the parent, so 'spawn' loses nothing.
        """
        ctx = get_context(start_method)
        super().__init__(
            max_workers=processes or cpu_count(),
            mp_context=ctx,
            initializer=initializer,
            initargs=initargs,
        )

    def __enter__(self) -> "Pool":
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        self.shutdown(wait=True, cancel_futures=exc_type is not None)

    def map_ordered(
        self,
        func: Callable[[T], R],
        tasks: Iterable[T],
        chunksize: Optional[int] = None
    ) -> List[R]:
        """
        Apply ``func`` to every task and return the results in task order,
        whatever order the workers finish in.
        """
        tasks = list(tasks)
        if chunksize is None:
            chunksize = _calculate_chunksize(tasks, self._max_workers)
        return list(super().map(func, tasks, chunksize=chunksize))


def _calculate_chunksize(tasks: Sequence, workers: int) -> int:
    """About four chunks per worker."""
    if isinstance(tasks, Sized):
        chunksize, extra = divmod(len(tasks), workers * 4)
        return chunksize + 1 if extra else max(1, chunksize)
    return 1
