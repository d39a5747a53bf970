"""
Seeded random streams and the worker pool used by every Monte Carlo loop.

Streams are derived from (master seed, key...) through numpy's SeedSequence,
so a stream never depends on how many others were created before it or on
which thread consumes it.
"""

import concurrent.futures
import logging
import math
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def stream_for(seed: int, *key: int) -> np.random.Generator:
    """
    Generator addressed by (seed, key...) without any shared sequential state.

    Args:
        seed: Master seed of the run
        key: Non-negative integers naming the consumer (trace salt, chunk index, ...)

    Returns:
        A numpy Generator that is identical whenever seed and key are
    """
    return np.random.default_rng(seed_sequence_for(seed, *key))


def seed_sequence_for(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(part) for part in key))


def run_parallel(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> List[R]:
    """
    Apply fn to every item, in a thread pool when threads > 1.

    Results come back in item order no matter which worker finished first.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    results: List[Optional[R]] = [None] * len(items)
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        future_to_index = {executor.submit(fn, item): index for index, item in enumerate(items)}
        for future in concurrent.futures.as_completed(future_to_index):
            index = future_to_index[future]
            try:
                results[index] = future.result()
            except Exception as e:
                logger.error("Worker failed", extra={"item_index": index, "error": str(e)})
                raise
    return results


def exact_sum(values: Iterable[float]) -> float:
    """Correctly rounded sum; the result does not depend on summation order."""
    return math.fsum(float(v) for v in values)


def exact_mean(values: Sequence[float]) -> float:
    values = list(values)
    return exact_sum(values) / len(values)
