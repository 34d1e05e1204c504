"""
Seeded sampling streams and the chunked parallel map

Every sampling campaign is split into fixed-size chunks. Chunk i of a
campaign tagged `tag` draws from its own counter-based Philox stream keyed by
(seed, tag, i), so results depend only on (seed, tag, sample count) and not
on how many worker threads evaluate the chunks.
"""

import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64 - 1

T = TypeVar("T")


def tag_key(tag: str) -> int:
    """Stable 32-bit key for a stream tag"""
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed: int, tag: str, chunk: int = 0) -> np.random.Generator:
    """Independent Generator for (seed, tag, chunk)"""
    if not 0 <= int(seed) <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=(tag_key(tag), int(chunk)))
    return np.random.Generator(np.random.Philox(sequence))


def chunk_sizes(total: int, chunk_size: int) -> List[int]:
    if total <= 0:
        return []
    full, rest = divmod(total, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def parallel_chunks(
    seed: int,
    tag: str,
    total: int,
    work: Callable[[np.random.Generator, int, int], T],
    chunk_size: int = 4096,
    workers: int = 1,
) -> List[T]:
    """Run work(rng, count, chunk_index) over all chunks; results in chunk order"""
    sizes = chunk_sizes(total, chunk_size)
    if not sizes:
        return []

    def run(index: int) -> T:
        return work(stream(seed, tag, index), sizes[index], index)

    if workers <= 1 or len(sizes) == 1:
        return [run(i) for i in range(len(sizes))]

    with ThreadPoolExecutor(max_workers=workers) as executor:
        # map preserves submission order
        results = list(executor.map(run, range(len(sizes))))
    logger.debug("campaign %s: %d samples in %d chunks on %d workers", tag, total, len(sizes), workers)
    return results

