"""Streaming mean and variance (Welford) over fixed-width vectors."""

from __future__ import annotations

import math

import numpy as np


class RunningStats:
    """Accumulates vectors one at a time; memory stays O(width)."""

    def __init__(self, width: int):
        self.count = 0
        self.mean = np.zeros(width)
        self.m2 = np.zeros(width)

    def add(self, x: np.ndarray) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def merge(self, other: "RunningStats") -> "RunningStats":
        """Combine two disjoint accumulations (Chan et al. pairwise update)."""
        merged = RunningStats(self.mean.size)
        if other.count == 0:
            merged.count, merged.mean, merged.m2 = self.count, self.mean.copy(), self.m2.copy()
            return merged
        if self.count == 0:
            merged.count, merged.mean, merged.m2 = other.count, other.mean.copy(), other.m2.copy()
            return merged
        total = self.count + other.count
        delta = other.mean - self.mean
        merged.count = total
        merged.mean = self.mean + delta * (other.count / total)
        merged.m2 = self.m2 + other.m2 + delta ** 2 * (self.count * other.count / total)
        return merged

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.full(self.mean.size, math.nan)
        return self.m2 / (self.count - 1)

    @property
    def std_error(self) -> np.ndarray:
        if self.count < 2:
            return np.full(self.mean.size, math.nan)
        return np.sqrt(self.variance / self.count)
