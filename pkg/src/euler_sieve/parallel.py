"""Deterministic chunked parallel evaluation."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_WIDTH = None


def width() -> int:
    """Worker count: set_width() value, else EULER_SIEVE_THREADS, else the core count."""
    if _WIDTH is not None:
        return _WIDTH
    env = os.environ.get("EULER_SIEVE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def set_width(n: int | None) -> None:
    global _WIDTH
    _WIDTH = None if n is None else max(1, int(n))


def map_chunks(func, x, chunk: int = 128, workers: int | None = None):
    """Apply ``func`` to consecutive slices of ``x`` and concatenate in order.

    Each output element depends only on its own input, so the result does not
    depend on the worker count.
    """
    x = np.asarray(x)
    if len(x) == 0:
        return func(x)
    pieces = [x[a:a + chunk] for a in range(0, len(x), chunk)]
    workers = workers or width()
    if workers == 1 or len(pieces) == 1:
        out = [func(p) for p in pieces]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(func, pieces))
    if isinstance(out[0], tuple):
        return tuple(np.concatenate(parts) for parts in zip(*out))
    return np.concatenate(out)
