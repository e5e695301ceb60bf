"""
Work Pool

Runs independent experiment cells on a thread pool. Every cell gets its own
seed derived from the master seed and the cell's index, so results do not
depend on scheduling or on the number of threads.
"""

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np
from loguru import logger

T = TypeVar("T")
R = TypeVar("R")


def cell_seed(master: int, *key: int) -> int:
    """Deterministic 63-bit seed for the cell identified by ``key``."""
    sequence = np.random.SeedSequence(entropy=master, spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def run_cells(
    fn: Callable[[T], R],
    cells: Sequence[T],
    threads: int = 1,
    label: str = "cells",
) -> list[R]:
    """
    Apply ``fn`` to every cell, in order.

    Args:
        fn: Work function; must not share mutable state between cells.
        cells: Inputs, one per cell.
        threads: Pool size; 1 runs inline.
        label: Name used in progress logging.

    Returns:
        Results aligned with ``cells``.
    """
    total = len(cells)
    logger.info(f"Running {total} {label} on {threads} thread(s)")
    if threads <= 1 or total <= 1:
        return [fn(cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=threads, thread_name_prefix="probcub") as pool:
        return list(pool.map(fn, cells))
