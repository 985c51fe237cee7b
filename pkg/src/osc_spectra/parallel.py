"""Thread-capped, order-stable reductions over independent work items."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "OSC_SPECTRA_THREADS"
CHUNK = 8


def thread_count():
    """Worker cap: OSC_SPECTRA_THREADS if set, else the CPU count."""
    cpus = os.cpu_count() or 1
    raw = os.environ.get(ENV_THREADS)
    if raw is None or raw.strip() == "":
        return cpus
    try:
        n = int(raw)
    except ValueError:
        return cpus
    return max(1, n)


def ordered_sum(term, items, chunk=CHUNK, threads=None):
    """sum(term(x) for x in items) with a reduction order fixed by ``chunk``.

    Items are summed left to right inside fixed-size chunks and the chunk
    sums are then added in chunk order, so the result does not depend on how
    many threads ran the chunks.
    """
    items = list(items)
    if not items:
        raise ValueError("ordered_sum needs at least one item")
    chunks = [items[i:i + chunk] for i in range(0, len(items), chunk)]

    def run(block):
        acc = term(block[0])
        for x in block[1:]:
            acc = acc + term(x)
        return acc

    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(chunks) == 1:
        partial = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=min(threads, len(chunks))) as pool:
            partial = list(pool.map(run, chunks))
    total = partial[0]
    for p in partial[1:]:
        total = total + p
    return total
