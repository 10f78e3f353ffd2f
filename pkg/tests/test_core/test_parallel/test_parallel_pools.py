import math

import pytest

from stablelab.core.parallel import Pool, ThreadPool, run_ordered
from stablelab.exceptions import ParameterError


@pytest.mark.parametrize("mode", ["process", "thread"])
def test_run_ordered_keeps_task_order(mode):
    tasks = list(range(17))
    assert run_ordered(math.factorial, tasks, workers=3, mode=mode) == [math.factorial(t) for t in tasks]


def test_single_worker_runs_inline():
    assert run_ordered(lambda x: x * x, [3, 4], workers=1) == [9, 16]
    assert run_ordered(math.factorial, [], workers=4) == []


def test_run_ordered_rejects_bad_arguments():
    with pytest.raises(ParameterError):
        run_ordered(math.factorial, [1], workers=0)
    with pytest.raises(ParameterError):
        run_ordered(math.factorial, [1, 2], workers=2, mode="gpu")


def test_pools_map_ordered():
    with Pool(processes=2) as pool:
        assert pool.map_ordered(math.factorial, [1, 2, 3]) == [1, 2, 6]
    with ThreadPool(max_workers=2) as pool:
        assert pool.map_ordered(lambda x: -x, [1, 2, 3]) == [-1, -2, -3]
