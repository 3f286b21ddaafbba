"""
Seeded random streams.

Every random draw in the package comes from a numpy Generator derived from one
integer seed plus a purpose string, so two modules never share a stream and a
run is reproducible from its seed alone.
"""

import hashlib

import numpy as np


def purpose_key(purpose: str) -> int:
    """64-bit key for a purpose string (stable across processes, unlike hash())."""
    digest = hashlib.sha256(purpose.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(seed: int, purpose: str, *index: int) -> np.random.Generator:
    """
    Generator for the sub-stream (seed, purpose, *index).

    Args:
        seed: Root seed of the run
        purpose: Domain-separation label, e.g. "bayes-init" or "uncertainty"
        index: Optional integers, e.g. the pass number of a Monte Carlo sample

    Returns:
        Independent numpy Generator
    """
    sequence = np.random.SeedSequence(
        entropy=int(seed), spawn_key=(purpose_key(purpose), *map(int, index))
    )
    return np.random.default_rng(sequence)


def derive_seed(seed: int, purpose: str, *index: int) -> int:
    """Integer seed for libraries that take an int (networkx)."""
    return int(derive_rng(seed, purpose, *index).integers(0, 2**31 - 1))
