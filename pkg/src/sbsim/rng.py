"""Deterministic random-stream derivation.

Every randomness consumer (sensor noise per node, loss per link) gets its
own PCG64 stream derived from the world seed plus stable string labels, so
adding a consumer never shifts another consumer's draws.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_entropy(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *labels: str) -> np.random.Generator:
    """Independent generator for (seed, labels); stable across runs and platforms."""
    entropy = [seed & _MASK64] + [_label_entropy(lab) for lab in labels]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
