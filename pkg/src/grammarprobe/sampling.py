"""Deterministic sampling primitives.

Golden files pin task instances byte-exactly, so every stochastic choice must
reproduce across platforms *and* Python versions. The stdlib only guarantees
stream stability for ``random.Random.random()`` itself, not for ``shuffle``
or ``sample``, so the few sampling routines we need are built directly on
that guaranteed stream.
"""

from __future__ import annotations

import hashlib
import random
from typing import Sequence, TypeVar

T = TypeVar("T")

_MASK63 = (1 << 63) - 1


def derive_seed(master: int, *labels: object) -> int:
    """Stable 63-bit child seed for a named substream."""
    material = repr((master,) + labels).encode("utf-8")
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big") & _MASK63


class DetRng:
    """Seeded RNG exposing only version-stable operations."""

    def __init__(self, seed: int):
        self._rng = random.Random(seed)

    def random(self) -> float:
        return self._rng.random()

    def below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        # random() < 1.0 strictly, so the floor is always < n
        return int(self._rng.random() * n)

    def choice(self, seq: Sequence[T]) -> T:
        return seq[self.below(len(seq))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, seq: Sequence[T], k: int) -> list[T]:
        """k distinct items, order random (partial Fisher-Yates)."""
        n = len(seq)
        if k > n:
            raise ValueError(f"sample size {k} exceeds population {n}")
        pool = list(seq)
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
