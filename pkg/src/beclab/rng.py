"""Per-trajectory random streams.

Every stream is a Philox4x64 generator keyed by the 64-bit run seed, with the
trajectory index and a purpose tag placed in the upper counter words. A
trajectory therefore draws the same numbers whatever the ensemble size or the
order in which trajectories are processed.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .core import DomainError

TAG_INCREMENTS = 0
TAG_SAMPLING = 1

_U64 = 1 << 64


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < _U64:
        raise DomainError("seed must be an unsigned 64-bit integer")
    return seed


def stream(seed: int, trajectory: int, tag: int = TAG_INCREMENTS) -> np.random.Generator:
    if trajectory < 0 or tag < 0:
        raise DomainError("trajectory index and tag must be non-negative")
    bits = np.random.Philox(key=check_seed(seed), counter=[0, 0, int(trajectory), int(tag)])
    return np.random.Generator(bits)


class StreamBank:
    """One generator per trajectory, advanced in lockstep."""

    def __init__(self, seed: int, trajectories: Iterable[int], tag: int = TAG_INCREMENTS):
        self.seed = check_seed(seed)
        self.trajectories = np.asarray(list(trajectories), dtype=np.int64)
        self.tag = tag
        self._gens = [stream(self.seed, int(j), tag) for j in self.trajectories]

    def __len__(self) -> int:
        return len(self._gens)

    def normals(self, count: int) -> np.ndarray:
        out = np.empty((len(self._gens), count))
        for row, gen in enumerate(self._gens):
            out[row] = gen.standard_normal(count)
        return out

    def uniforms(self, count: int) -> np.ndarray:
        out = np.empty((len(self._gens), count))
        for row, gen in enumerate(self._gens):
            out[row] = gen.random(count)
        return out

    def subset(self, rows: np.ndarray) -> "StreamBank":
        """View on some of the trajectories; generators are shared, not copied."""
        view = object.__new__(StreamBank)
        view.seed, view.tag = self.seed, self.tag
        view.trajectories = self.trajectories[rows]
        view._gens = [self._gens[int(r)] for r in rows]
        return view
