"""
Deterministic reductions.

Partial results are combined by a fixed pairwise tree over their index
order, so the total does not depend on the order in which workers finish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")


def tree_reduce(items: Sequence[T], combine: Callable[[T, T], T]) -> T:
    """Pairwise tree reduction: ((0,1),(2,3)), ... until one item remains."""
    if not items:
        raise ValueError("cannot reduce an empty sequence")
    level = list(items)
    while len(level) > 1:
        nxt = [combine(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def tree_sum(values: Sequence[float]) -> float:
    return float(tree_reduce([float(v) for v in values], lambda a, b: a + b))


def tree_max(values: Sequence[float]) -> float:
    return float(tree_reduce([float(v) for v in values], max))


def tree_sum_arrays(arrays: Sequence[np.ndarray]) -> np.ndarray:
    return tree_reduce([np.asarray(a, dtype=float) for a in arrays], np.add)


@dataclass(frozen=True)
class Moments:
    """Count, mean and centered sum of squares of one block of samples."""

    n: int
    mean: float
    m2: float

    @classmethod
    def of(cls, values: np.ndarray) -> "Moments":
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return cls(0, 0.0, 0.0)
        mean = float(values.mean())
        return cls(int(values.size), mean, float(np.sum((values - mean) ** 2)))

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.n) if self.n > 0 else math.inf


def combine_moments(a: Moments, b: Moments) -> Moments:
    """Pairwise merge of two blocks (Chan, Golub and LeVeque)."""
    if a.n == 0:
        return b
    if b.n == 0:
        return a
    n = a.n + b.n
    delta = b.mean - a.mean
    return Moments(n, a.mean + delta * b.n / n, a.m2 + b.m2 + delta * delta * a.n * b.n / n)


def tree_moments(blocks: Sequence[Moments]) -> Moments:
    return tree_reduce(list(blocks), combine_moments)
