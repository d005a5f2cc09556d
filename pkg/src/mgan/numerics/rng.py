"""Seeded randomness.

All draws go through numpy's Philox counter-based bit generator, whose output
stream is fixed by the seed alone (no platform or thread dependence).
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

ALGORITHM = "philox4x64-10"


class Rng:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self.algorithm = ALGORITHM
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def random(self, shape=None) -> np.ndarray:
        return self._gen.random(size=shape)

    def standard_normal(self, shape=None) -> np.ndarray:
        return self._gen.standard_normal(size=shape)

    def integers(self, low: int, high: int | None = None, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, seq, size=None, replace: bool = True):
        return self._gen.choice(seq, size=size, replace=replace)

    def spawn(self, offset: int) -> "Rng":
        """Independent stream derived deterministically from this seed."""
        return Rng((self.seed * 1_000_003 + offset) % (2**63))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, algorithm={self.algorithm!r})"


def init_uniform(shape, rng: Rng, scale: float = 0.01, requires_grad: bool = False) -> Tensor:
    """Draw from U(-scale, scale); the default matches the weight initializer."""
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if any(s <= 0 for s in shape):
        raise ValueError(f"init_uniform needs a positive shape, got {shape}")
    return Tensor(rng.uniform(-scale, scale, shape), requires_grad=requires_grad)
