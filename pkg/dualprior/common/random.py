import zlib
from contextlib import contextmanager
from typing import Iterator

import numpy as np
import torch

_MASK64 = (1 << 64) - 1


def keyed_rng(seed: int, index: int, tag: str) -> np.random.Generator:
    """Returns a counter-based generator keyed on (seed, index, tag).

    Philox output depends only on its key and counter, so streams are reproducible across platforms and
    independent of the order in which clips or iterations are processed.

    Args:
        seed (int): 64-bit run or dataset seed.
        index (int): Clip index, iteration number, or any other stream selector. Must be below 2**32.
        tag (str): Stage tag separating streams that share seed and index, ie "degrade" or "motion".

    Returns:
        np.random.Generator: A fresh generator positioned at counter zero
    """
    if not 0 <= index < 2**32:
        raise ValueError(f"index must fit in 32 bits, got {index}")

    stage_code = zlib.crc32(tag.encode("utf-8"))
    key = np.array([seed & _MASK64, (index << 32) | stage_code], dtype=np.uint64)

    return np.random.Generator(np.random.Philox(key=key))


@contextmanager
def seeded_init(seed: int, tag: str) -> Iterator[None]:
    """Seeds torch's global generator from (seed, tag) for the duration of the block, restoring it afterwards.

    Used around module construction so parameter initialization is reproducible without disturbing callers.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(keyed_rng(seed, 0, tag).integers(0, 2**62)))
        yield
