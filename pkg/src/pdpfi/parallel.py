"""Order-preserving parallel map over independent work units.

Work units carry their own counter-derived seeds, so results do not depend
on the worker count. Workers are forked; the callable is handed over through
a module global instead of being pickled, which keeps closures usable.
"""
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor

_TASK = None


def _run(i):
    return _TASK(i)


def resolve_threads(threads):
    if threads is None or int(threads) <= 0:
        return os.cpu_count() or 1
    return int(threads)


def pmap(fn, n_items, threads=1):
    """Return ``[fn(0), ..., fn(n_items - 1)]``, optionally across processes."""
    global _TASK
    threads = min(resolve_threads(threads), n_items)
    if threads <= 1 or "fork" not in mp.get_all_start_methods():
        return [fn(i) for i in range(n_items)]
    prev, _TASK = _TASK, fn
    try:
        with ProcessPoolExecutor(threads, mp_context=mp.get_context("fork")) as ex:
            return list(ex.map(_run, range(n_items), chunksize=max(1, n_items // (4 * threads))))
    finally:
        _TASK = prev
