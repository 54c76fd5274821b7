"""Uniform (DeepWalk) and p/q-biased second-order (Node2Vec) random walks."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

from .alias import AliasTable, build_alias_table


class WalkMode(str, Enum):
    FIRST_ORDER = "FirstOrder"
    SECOND_ORDER = "SecondOrder"


@dataclass(frozen=True)
class WalkConfig:
    walk_length: int = 10
    walks_per_node: int = 10
    p: float = 1.0
    q: float = 1.0
    seed: int = 0
    mode: WalkMode = WalkMode.SECOND_ORDER
    directed: bool = True

    def __post_init__(self):
        if self.walk_length < 1:
            raise ValueError("walk_length must be >= 1")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be > 0")
        object.__setattr__(self, "mode", WalkMode(self.mode))


class WalkGraph:
    """Integer-indexed adjacency over hashable node keys.

    ``neighbors`` follows out-edges when directed; ``adjacent`` ignores
    direction and is what distance-1 tests in the bias use.
    """

    def __init__(self, edges: Iterable[tuple[Hashable, Hashable]], nodes: Sequence[Hashable] | None = None,
                 directed: bool = True):
        edges = list(edges)
        if nodes is None:
            seen = {}
            for u, v in edges:
                seen.setdefault(u, None)
                seen.setdefault(v, None)
            nodes = list(seen)
        self.keys: list = list(nodes)
        self.index = {k: i for i, k in enumerate(self.keys)}
        if len(self.index) != len(self.keys):
            raise ValueError("duplicate node keys")
        self.directed = directed
        out: list[set[int]] = [set() for _ in self.keys]
        und: list[set[int]] = [set() for _ in self.keys]
        for u, v in edges:
            a, b = self.index[u], self.index[v]
            if a == b:
                continue
            out[a].add(b)
            und[a].add(b)
            und[b].add(a)
            if not directed:
                out[b].add(a)
        self._neighbors = [np.array(sorted(s), dtype=np.int64) for s in out]
        self._adjacent = [frozenset(s) for s in und]

    def __len__(self) -> int:
        return len(self.keys)

    def neighbors(self, i: int) -> np.ndarray:
        return self._neighbors[i]

    def adjacent(self, a: int, b: int) -> bool:
        return b in self._adjacent[a]


def bias_coefficient(d_uv: int, p: float, q: float) -> float:
    """Return-parameter / in-out-parameter weight for a hop at distance ``d_uv`` from the previous node."""
    if d_uv == 0:
        return 1.0 / p
    if d_uv == 1:
        return 1.0
    if d_uv == 2:
        return 1.0 / q
    raise ValueError(f"distance must be 0, 1 or 2, got {d_uv}")


def _distance(graph: WalkGraph, prev: int, x: int) -> int:
    if x == prev:
        return 0
    return 1 if graph.adjacent(prev, x) else 2


def transition_distribution(prev: int | None, cur: int, graph: WalkGraph, p: float, q: float):
    """Next-hop neighbors of ``cur`` and their normalized biased probabilities."""
    nbrs = graph.neighbors(cur)
    if nbrs.size == 0:
        raise ValueError(f"node {graph.keys[cur]!r} has no outgoing neighbors")
    if prev is None:
        return nbrs, np.full(nbrs.size, 1.0 / nbrs.size)
    weights = np.array([bias_coefficient(_distance(graph, prev, int(x)), p, q) for x in nbrs])
    return nbrs, weights / weights.sum()


class _Sampler:
    def __init__(self, graph: WalkGraph, config: WalkConfig):
        self.graph = graph
        self.config = config
        self._first: dict[int, AliasTable] = {}
        self._second: dict[tuple[int, int], AliasTable] = {}

    def _uniform(self, cur: int, rng: np.random.Generator) -> int:
        nbrs = self.graph.neighbors(cur)
        return int(nbrs[rng.integers(nbrs.size)])

    def step(self, prev: int | None, cur: int, rng: np.random.Generator) -> int:
        if self.config.mode is WalkMode.FIRST_ORDER or prev is None:
            return self._uniform(cur, rng)
        key = (prev, cur)
        table = self._second.get(key)
        if table is None:
            _, probs = transition_distribution(prev, cur, self.graph, self.config.p, self.config.q)
            table = self._second[key] = build_alias_table(probs)
        return int(self.graph.neighbors(cur)[table.sample(rng)])

    def walk(self, start: int, rng: np.random.Generator) -> list[int]:
        walk = [start]
        prev = None
        while len(walk) < self.config.walk_length:
            cur = walk[-1]
            if self.graph.neighbors(cur).size == 0:
                break
            nxt = self.step(prev, cur, rng)
            prev = cur
            walk.append(nxt)
        return walk


def node_rng(seed: int, node_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, node_index])


def generate_walks(graph: WalkGraph, config: WalkConfig) -> list[list[int]]:
    """``walks_per_node`` walks from every node, node-major in index order.

    Each start node draws from its own stream seeded by ``(seed, index)``,
    so any partition of the start nodes reproduces the same walks.
    """
    if len(graph) == 0:
        raise ValueError("graph has no nodes")
    sampler = _Sampler(graph, config)
    walks = []
    for start in range(len(graph)):
        rng = node_rng(config.seed, start)
        for _ in range(config.walks_per_node):
            walks.append(sampler.walk(start, rng))
    return walks


def write_walks(path: str | Path, walks: Sequence[Sequence[int]], graph: WalkGraph) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for w in walks:
            fh.write(" ".join(str(graph.keys[i]) for i in w) + "\n")
