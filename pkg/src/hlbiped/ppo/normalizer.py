"""Running observation statistics that can be merged across workers."""

from __future__ import annotations

import numpy as np

EPS = 1e-8


class Normalizer:
    def __init__(self, dim: int, clip: float = 10.0):
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)
        self.count = 0.0
        self.clip = clip

    @property
    def var(self) -> np.ndarray:
        if self.count < 2:
            return np.ones_like(self.mean)
        return np.maximum(self.m2 / self.count, EPS)

    def update(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        other = Normalizer(x.shape[1], self.clip)
        other.count = float(x.shape[0])
        other.mean = x.mean(axis=0)
        other.m2 = ((x - other.mean) ** 2).sum(axis=0)
        self.merge(other)

    def merge(self, other: "Normalizer"):
        """Combine statistics of disjoint samples (parallel variance formula)."""
        n = self.count + other.count
        if other.count == 0:
            return self
        if self.count == 0:
            self.mean, self.m2, self.count = other.mean.copy(), other.m2.copy(), other.count
            return self
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.count / n)
        self.m2 = self.m2 + other.m2 + delta**2 * (self.count * other.count / n)
        self.count = n
        return self

    def normalize(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / np.sqrt(self.var)
        return np.clip(z, -self.clip, self.clip)

    def copy(self) -> "Normalizer":
        c = Normalizer(len(self.mean), self.clip)
        c.mean, c.m2, c.count = self.mean.copy(), self.m2.copy(), self.count
        return c
