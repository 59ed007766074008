"""Order-preserving thread map; `PSEUDOGROUP_THREADS` caps the number of workers."""
import logging
import os
from concurrent.futures import ThreadPoolExecutor

from typing_extensions import Callable, Iterable, List, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

ENV_THREADS = "PSEUDOGROUP_THREADS"
_DEFAULT_CAP = 8


def worker_count() -> int:
    raw = os.environ.get(ENV_THREADS, "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("Ignoring %s=%r, expected a positive integer", ENV_THREADS, raw)
    return max(1, min(_DEFAULT_CAP, os.cpu_count() or 1))


def thread_map(function: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """Like `list(map(function, items))`; results keep the order of `items` whatever the schedule."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(function, items))
