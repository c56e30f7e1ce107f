"""Deterministic randomness: label-split seeds and counter-based field sampling.

Every run derives per-subsystem seeds from one master seed by hashing fixed
labels, so repeated runs with the same seed are byte-identical regardless of
call order.
"""

from __future__ import annotations

import hashlib

from .galois import PrimeField


def derive_seed(master: int, label: str) -> int:
    """64-bit seed derived from a master seed and a subsystem label."""
    h = hashlib.blake2b(digest_size=8)
    h.update((master % 2**64).to_bytes(8, "little"))
    h.update(label.encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


class FieldSampler:
    """Uniform F_q elements from a keyed counter stream.

    Counter-based (stateless apart from the counter), so outputs depend only
    on (seed, draw index); rejection sampling removes modulo bias exactly.
    """

    def __init__(self, field: PrimeField, seed: int):
        self.field = field
        self._key = (seed % 2**64).to_bytes(8, "little")
        self._counter = 0
        # Largest multiple of q below 2^64; draws at or above it are rejected.
        self._limit = (2**64 // field.q) * field.q

    def _draw64(self) -> int:
        h = hashlib.blake2b(self._counter.to_bytes(16, "little"), digest_size=8, key=self._key)
        self._counter += 1
        return int.from_bytes(h.digest(), "little")

    def next_element(self) -> int:
        while True:
            v = self._draw64()
            if v < self._limit:
                return v % self.field.q

    def vector(self, n: int) -> list[int]:
        return [self.next_element() for _ in range(n)]
