"""Deterministic splittable random streams.

Every stochastic routine in the package takes an explicit stream derived
from a run seed plus integer/string keys (chain id, experiment name, ...),
so parallel and serial executions see identical randomness.
"""

import hashlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def derive_rng(seed, *keys) -> np.random.Generator:
    """Generator for stream (seed, *keys); distinct keys give independent streams."""
    ss = np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=tuple(_key_to_int(k) for k in keys),
    )
    return np.random.default_rng(ss)
