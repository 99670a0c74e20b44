"""Reproducible Brownian increments keyed on (master seed, path index).

Each path owns an independent Philox stream whose 128-bit key is the pair
``(master_seed, path_index)``; increment ``k`` is row ``k`` of that stream.
Paths can therefore be generated in any order, in any grouping, on any number
of workers, and still come out identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["BrownianSource"]

_U64 = 2 ** 64


@dataclass(frozen=True)
class BrownianSource:
    master_seed: int
    dimension: int = 1

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < _U64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.dimension < 1:
            raise ValueError("noise dimension must be positive")

    def generator(self, path_index: int) -> np.random.Generator:
        if not 0 <= path_index < _U64:
            raise ValueError("path_index must be an unsigned 64-bit integer")
        key = np.array([int(self.master_seed), int(path_index)], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def increments(self, path_index: int, n_steps: int, dt: float) -> np.ndarray:
        """Increments ``B((k+1)dt) - B(k dt)`` for ``k < n_steps``, shape ``(n_steps, d)``."""
        z = self.generator(path_index).standard_normal((n_steps, self.dimension))
        return math.sqrt(dt) * z

    def increment(self, path_index: int, k: int, dt: float) -> np.ndarray:
        return self.increments(path_index, k + 1, dt)[k]

    def block(self, path_indices, n_steps: int, dt: float) -> np.ndarray:
        """Stacked increments for several paths, shape ``(len(path_indices), n_steps, d)``."""
        out = np.empty((len(path_indices), n_steps, self.dimension))
        for row, p in enumerate(path_indices):
            out[row] = self.increments(p, n_steps, dt)
        return out
