"""
Ordered parallel map over independent work items.

Results always come back in input order so every reduction downstream
sums in a fixed order regardless of scheduling.
"""

import logging
from typing import Callable, Iterable, List, Optional, TypeVar

from joblib import Parallel, delayed

from app.core.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(func: Callable[[T], R], items: Iterable[T], n_jobs: Optional[int] = None) -> List[R]:
    """
    Apply `func` to every item, threads when more than one worker is allowed.

    Args:
        func: pure function of one item
        items: work items
        n_jobs: joblib worker count; defaults to settings.n_jobs

    Returns:
        List of results in the order of `items`
    """
    items = list(items)
    jobs = settings.n_jobs if n_jobs is None else n_jobs
    if jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.debug(f"Dispatching {len(items)} items over n_jobs={jobs}")
    return Parallel(n_jobs=jobs, prefer="threads")(delayed(func)(item) for item in items)
