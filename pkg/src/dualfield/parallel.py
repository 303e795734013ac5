"""Deterministic chunked execution.

Work is always split into the same chunks regardless of the thread count and
results are returned in chunk order, so reductions performed by the caller
are bit-identical for any ``threads`` value.  BLAS is pinned to one thread
inside each chunk for the same reason.
"""

from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None


@contextmanager
def single_threaded_blas():
    if threadpool_limits is None:  # pragma: no cover
        yield
        return
    with threadpool_limits(limits=1, user_api="blas"):
        yield


def chunk_ranges(n, chunk):
    """Split ``range(n)`` into ``[start, stop)`` pairs of fixed size."""
    if chunk <= 0:
        raise ValueError("chunk size must be positive")
    return [(s, min(s + chunk, n)) for s in range(0, n, chunk)]


def ordered_map(fn, items, threads=1):
    """``[fn(item) for item in items]``, optionally on a thread pool."""
    items = list(items)
    with single_threaded_blas():
        if threads is None or threads <= 1 or len(items) <= 1:
            return [fn(it) for it in items]
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            return list(pool.map(fn, items))
