import os

import pytest

from utils.process_manager import ProcessManager


def square_plus(offset, index):
    return index * index + offset


def worker_pid(_, index):
    return os.getpid()


def failing(_, index):
    if index == 2:
        raise RuntimeError("chunk 2 failed")
    return index


def test_inline_and_pool_results_match():
    manager = ProcessManager()
    inline = manager.run_chunks(square_plus, 10, 7, workers=1)
    pooled = manager.run_chunks(square_plus, 10, 7, workers=3)
    assert inline == pooled == [10, 11, 14, 19, 26, 35, 46]
    assert manager.tracked_processes == {}


def test_pool_runs_in_child_processes():
    pids = ProcessManager().run_chunks(worker_pid, None, 4, workers=2)
    assert os.getpid() not in pids


def test_no_chunks():
    assert ProcessManager().run_chunks(square_plus, 0, 0, workers=4) == []


def test_failure_propagates_and_cleans_up():
    manager = ProcessManager()
    with pytest.raises(RuntimeError):
        manager.run_chunks(failing, None, 5, workers=2)
    assert manager.tracked_processes == {}
    assert manager.cleanup_all_tracked() == 0
