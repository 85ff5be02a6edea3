"""Seeded random streams. Every random draw in the package goes through here."""

from typing import Union

import numpy as np


def make_rng(seed: int, *stream: Union[int, str]) -> np.random.Generator:
    """
    Build an independent generator for a named sub-stream of a seed.

    Args:
        seed: Experiment seed
        stream: Extra keys (ints or short strings) naming the sub-stream

    Returns:
        numpy Generator, identical for identical (seed, stream)
    """
    keys = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for key in stream:
        if isinstance(key, str):
            keys.extend(key.encode("utf-8"))
        else:
            keys.append(int(key))
    return np.random.default_rng(np.random.SeedSequence(keys))


def uniform_coeffs(count: int, seed: int, *stream: Union[int, str]) -> np.ndarray:
    """Coefficients drawn uniform in [-1, 1]."""
    return make_rng(seed, *stream).uniform(-1.0, 1.0, size=count)
