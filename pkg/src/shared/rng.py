"""
Named random streams.

All randomness flows from one master seed. A stream is derived from the seed and a
purpose string, so components stay reproducible regardless of call order.
"""
import hashlib
from typing import Union

import numpy as np

SeedPart = Union[int, str]


def derive_seed(seed: int, *purpose: SeedPart) -> int:
    """Hash a master seed and purpose parts into a 64-bit seed"""
    key = "/".join([str(int(seed))] + [str(p) for p in purpose])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *purpose: SeedPart) -> np.random.Generator:
    """Generator for the named stream"""
    return np.random.default_rng(derive_seed(seed, *purpose))
