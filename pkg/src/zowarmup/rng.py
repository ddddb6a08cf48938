"""Counter-based, splittable random streams.

Every random quantity in a run is drawn from a :class:`SeedStream`. A stream
is nothing more than a 64-bit key; each call that draws from it builds a fresh
Philox generator at counter zero, so the same key always yields the same
sequence no matter which process, thread or round asks for it. Child streams
are derived by hashing the parent key together with integer or string labels.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1


def _encode_label(label) -> bytes:
    if isinstance(label, str):
        raw = label.encode("utf-8")
        return b"s" + struct.pack("<I", len(raw)) + raw
    if isinstance(label, (int, np.integer)):
        return b"i" + struct.pack("<Q", int(label) & MASK64)
    raise TypeError(f"stream labels must be int or str, got {type(label).__name__}")


def derive_seed(key: int, *labels) -> int:
    """Hash a 64-bit key and a tuple of labels into a new 64-bit key."""
    h = hashlib.blake2b(digest_size=8, person=b"zowarmup-seed")
    h.update(struct.pack("<Q", int(key) & MASK64))
    for label in labels:
        h.update(_encode_label(label))
    return int.from_bytes(h.digest(), "little")


def perturbation_seed(run_seed: int, round_index: int, client_id: int, index: int) -> int:
    """Seed of the ``index``-th perturbation handed to ``client_id`` in ``round_index``."""
    return derive_seed(run_seed, "perturb", round_index, client_id, index)


@dataclass(frozen=True)
class SeedStream:
    """A reproducible random stream identified by a 64-bit key."""

    key: int

    def __post_init__(self):
        if not 0 <= int(self.key) <= MASK64:
            raise ValueError(f"stream key must fit in 64 bits, got {self.key}")

    def spawn(self, *labels) -> "SeedStream":
        return SeedStream(derive_seed(self.key, *labels))

    def generator(self) -> np.random.Generator:
        """A new numpy Generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(key=int(self.key)))

    def uniform(self, n: int) -> np.ndarray:
        return self.generator().random(n)

    def normal(self, n: int) -> np.ndarray:
        return self.generator().standard_normal(n)
