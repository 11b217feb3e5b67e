"""Unit tests for the point runner (app/phasefield/jobs.py)."""
import threading
import time

import pytest

from app.phasefield import jobs


def test_results_come_back_in_input_order():
    def slow_first(x):
        time.sleep(0.05 if x == 0 else 0.0)
        return x * x

    outcomes = jobs.run_points(slow_first, [0, 1, 2, 3], threads=4)
    assert [o.index for o in outcomes] == [0, 1, 2, 3]
    assert [o.unwrap() for o in outcomes] == [0, 1, 4, 9]


def test_single_thread_runs_inline():
    seen = []
    outcomes = jobs.run_points(lambda x: seen.append(threading.current_thread().name) or x, [1, 2], threads=1)
    assert [o.result for o in outcomes] == [1, 2]
    assert set(seen) == {threading.current_thread().name}


def test_a_failing_point_costs_only_its_own_outcome():
    def maybe_fail(x):
        if x == 1:
            raise RuntimeError("point exploded")
        return x

    outcomes = jobs.run_points(maybe_fail, [0, 1, 2], threads=2)
    assert [o.ok for o in outcomes] == [True, False, True]
    with pytest.raises(RuntimeError, match="exploded"):
        outcomes[1].unwrap()
    assert outcomes[2].unwrap() == 2


def test_progress_is_reported_for_every_point():
    calls = []
    jobs.run_points(lambda x: x, [1, 2, 3], threads=2, on_progress=lambda done, total: calls.append((done, total)))
    assert sorted(calls) == [(1, 3), (2, 3), (3, 3)]


def test_thread_resolution():
    assert jobs.resolve_threads(3) == 3
    assert jobs.resolve_threads(None) >= 1
    with pytest.raises(ValueError):
        jobs.resolve_threads(0)
    assert jobs.run_points(lambda x: x, []) == []
