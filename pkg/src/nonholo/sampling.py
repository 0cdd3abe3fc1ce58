"""Reproducible sample points on a coordinate box (splitmix64 stream)."""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

_MASK = (1 << 64) - 1


class SplitMix64:
    """The splitmix64 generator; identical streams on every platform."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def sample_points(box: Mapping[str, Sequence[float]], count: int = 32, seed: int = 0,
                  order: Sequence[str] | None = None) -> dict[str, np.ndarray]:
    """Uniform points in ``box``; returns coordinate name -> array of length ``count``.

    Draws are taken point by point, coordinates in ``order`` (default: box order).
    """
    names = list(order) if order is not None else list(box)
    rng = SplitMix64(seed)
    out = {name: np.empty(count) for name in names}
    for k in range(count):
        for name in names:
            lo, hi = box[name]
            out[name][k] = lo + (hi - lo) * rng.uniform()
    return out


def point_list(points: Mapping[str, np.ndarray]) -> list[dict[str, float]]:
    n = len(next(iter(points.values())))
    return [{name: float(arr[k]) for name, arr in points.items()} for k in range(n)]
