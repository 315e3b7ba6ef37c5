"""Order-preserving parallel map capped by the configured thread count."""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .log import logger
from .settings import get_settings

T = TypeVar("T")
R = TypeVar("R")


def pmap(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Apply fn to every item and return the results in input order.

    With a single thread (the default, see `ANISOHEAT_THREADS`) the map runs inline.
    """
    items = list(items)
    threads = threads or get_settings().threads
    threads = min(threads, len(items))
    if threads <= 1:
        return [fn(item) for item in items]
    logger.debug(f"Mapping over {len(items)} items with {threads} threads")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
