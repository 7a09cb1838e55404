"""Randomness capability: a CSPRNG for production, a seeded generator for
deterministic tests.  Everything that needs randomness takes one of these."""

from __future__ import annotations

import random
import secrets
from typing import List, Sequence, TypeVar

T = TypeVar("T")


class SecureRng:
    """Cryptographically secure randomness (os entropy)."""

    def randbelow(self, n: int) -> int:
        return secrets.randbelow(n)

    def randrange(self, lo: int, hi: int) -> int:
        return lo + secrets.randbelow(hi - lo)

    def permutation(self, items: Sequence[T]) -> List[T]:
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = secrets.randbelow(i + 1)
            out[i], out[j] = out[j], out[i]
        return out


class SeededRng:
    """Deterministic stand-in with the same interface; tests only."""

    def __init__(self, seed: int) -> None:
        self._rng = random.Random(seed)

    def randbelow(self, n: int) -> int:
        return self._rng.randrange(n)

    def randrange(self, lo: int, hi: int) -> int:
        return self._rng.randrange(lo, hi)

    def permutation(self, items: Sequence[T]) -> List[T]:
        out = list(items)
        self._rng.shuffle(out)
        return out
