"""Walker/Vose alias tables for O(1) sampling from discrete distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AliasTable:
    prob: np.ndarray   # acceptance probability of each cell
    alias: np.ndarray  # fallback index of each cell

    def __len__(self) -> int:
        return self.prob.shape[0]

    def sample(self, rng: np.random.Generator) -> int:
        n = self.prob.shape[0]
        i = int(rng.integers(n))
        return i if rng.random() < self.prob[i] else int(self.alias[i])

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        n = self.prob.shape[0]
        cells = rng.integers(n, size=size)
        accept = rng.random(size) < self.prob[cells]
        return np.where(accept, cells, self.alias[cells])

    def probabilities(self) -> np.ndarray:
        """Distribution encoded by the table (inverse of construction)."""
        n = self.prob.shape[0]
        out = self.prob / n
        np.add.at(out, self.alias, (1.0 - self.prob) / n)
        return out


def build_alias_table(probs, atol: float = 1e-9) -> AliasTable:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probabilities must be a non-empty 1-D sequence")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite and non-negative")
    total = p.sum()
    if abs(total - 1.0) > atol:
        raise ValueError(f"probabilities sum to {total!r}, expected 1")
    n = p.size
    scaled = p / total * n
    prob = np.ones(n)
    alias = np.arange(n)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        (small if scaled[g] < 1.0 else large).append(g)
    # leftovers are 1 up to rounding
    for i in small + large:
        prob[i] = 1.0
        alias[i] = i
    return AliasTable(prob, alias)
