"""Deterministic random streams.

Every random draw in the simulation comes from a generator keyed by
``(master seed, stream name, block index)``. Blocks are fixed-size runs of
clock cycles, so the numbers drawn for a given cycle never depend on how the
work is partitioned across threads or chunks.

The splitting function is ``numpy.random.SeedSequence`` with entropy
``[seed_lo, seed_hi, crc32(stream), block]``.
"""

import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_CYCLES = 1 << 16


def stream_id(name):
    return zlib.crc32(name.encode("utf8"))


def block_rng(seed, stream, block):
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    key = [seed & 0xFFFFFFFF, seed >> 32, stream_id(stream), int(block)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def n_blocks(n_cycles, block=BLOCK_CYCLES):
    return (int(n_cycles) + block - 1) // block


def block_bounds(n_cycles, block=BLOCK_CYCLES):
    for b in range(n_blocks(n_cycles, block)):
        yield b, b * block, min((b + 1) * block, int(n_cycles))


def map_blocks(fn, items, threads=1):
    """Apply ``fn`` to each item, in order, optionally on a thread pool."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def per_item_uniforms(seed, stream, block_of_item, n_per_item=1):
    """Uniform draws for items grouped by (non-decreasing) block index.

    Items belonging to the same block get consecutive draws from that
    block's generator, so results are independent of chunking.
    """
    block_of_item = np.asarray(block_of_item, dtype=np.int64)
    out = np.empty((block_of_item.size, n_per_item))
    if block_of_item.size == 0:
        return out
    starts = np.flatnonzero(np.r_[True, block_of_item[1:] != block_of_item[:-1]])
    ends = np.r_[starts[1:], block_of_item.size]
    for s, e in zip(starts, ends):
        rng = block_rng(seed, stream, block_of_item[s])
        out[s:e] = rng.random((e - s, n_per_item))
    return out
