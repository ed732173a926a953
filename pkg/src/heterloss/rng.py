"""Named, splittable random streams.

Every stochastic component (weight init, dropout masks, data splits, synthetic
sampling) pulls from its own labelled child stream so that toggling one of
them never perturbs the others. Labels are hashed with CRC32, which is stable
across platforms and Python versions.
"""

from __future__ import annotations

import zlib

import numpy as np


def child_seed(seed: int, *labels: object) -> int:
    """Derive a stable 64-bit child seed from a root seed and labels."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    entropy.extend(zlib.crc32(str(label).encode("utf-8")) for label in labels)
    seq = np.random.SeedSequence(entropy)
    return int(seq.generate_state(1, np.uint64)[0])


def stream(seed: int, *labels: object) -> np.random.Generator:
    """Independent generator for the (seed, labels) combination."""
    return np.random.default_rng(child_seed(seed, *labels))
