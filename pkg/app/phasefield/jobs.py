"""Run independent numerical points on a thread pool, results in input order.

Estimator restarts, multistart relaxations, film sequence points and
phase-diagram rows are independent of one another, so they fan out here. The
heavy lifting happens inside numpy and scipy, which release the GIL.

Order matters more than speed: results come back in the order the items went
in, whatever the completion order, so output files do not depend on the
thread count.
"""
from __future__ import annotations

import logging
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Generic, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class PointOutcome(Generic[R]):
    """The result of one item, or the exception it raised."""

    index: int
    result: R | None = None
    error: BaseException | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def unwrap(self) -> R:
        if self.error is not None:
            raise self.error
        return self.result  # type: ignore[return-value]


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        return os.cpu_count() or 1
    if threads < 1:
        raise ValueError(f"threads must be at least 1, got {threads}")
    return threads


def run_points(
    fn: Callable[[T], R],
    items: Sequence[T],
    threads: int | None = None,
    *,
    on_progress: Callable[[int, int], None] | None = None,
) -> list[PointOutcome[R]]:
    """Apply ``fn`` to every item and return one outcome per item, in input order.

    An item that raises costs only its own outcome. ``threads=1`` runs inline.
    """
    workers = resolve_threads(threads)
    total = len(items)
    outcomes: list[PointOutcome[R] | None] = [None] * total
    if not total:
        return []

    if workers == 1 or total == 1:
        for index, item in enumerate(items):
            outcomes[index] = _run_one(fn, index, item)
            if on_progress:
                on_progress(index + 1, total)
        return outcomes  # type: ignore[return-value]

    completed = 0
    with ThreadPoolExecutor(max_workers=min(workers, total)) as pool:
        futures = {pool.submit(_run_one, fn, index, item): index for index, item in enumerate(items)}
        for future in as_completed(futures):
            outcome = future.result()
            outcomes[outcome.index] = outcome
            completed += 1
            if on_progress:
                on_progress(completed, total)
    return outcomes  # type: ignore[return-value]


def _run_one(fn: Callable[[T], R], index: int, item: T) -> PointOutcome[R]:
    try:
        return PointOutcome(index, result=fn(item))
    except Exception as exc:  # one bad point, not a failed run
        logger.debug("point %d failed: %s", index, exc)
        return PointOutcome(index, error=exc)
