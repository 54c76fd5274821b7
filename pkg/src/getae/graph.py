"""Propagation-tree files, label files and per-tree network statistics."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

logger = logging.getLogger(__name__)

ROOT_SENTINEL = "ROOT"
RETAINED_LABELS = ("true", "false")

_TUPLE = r"\[\s*'([^']*)'\s*,\s*'([^']*)'\s*,\s*'([^']*)'\s*\]"
_EDGE_RE = re.compile(r"^\s*" + _TUPLE + r"\s*->\s*" + _TUPLE + r"\s*$")


class TreeFormatError(ValueError):
    pass


class LabelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class NodeRef:
    user_id: str
    tweet_id: str
    time_offset: float
    raw_time: str = field(default="", compare=False, repr=False)

    @classmethod
    def parse(cls, user_id: str, tweet_id: str, time: str) -> "NodeRef":
        if user_id == ROOT_SENTINEL:
            return cls(user_id, tweet_id, float("nan") if time == ROOT_SENTINEL else float(time), time)
        t = float(time)
        if not t >= 0:
            raise ValueError(f"negative or invalid time offset {time!r}")
        return cls(user_id, tweet_id, t, time)

    @property
    def is_sentinel(self) -> bool:
        return self.user_id == ROOT_SENTINEL

    def render(self) -> str:
        t = self.raw_time or repr(self.time_offset)
        return f"['{self.user_id}', '{self.tweet_id}', '{t}']"


@dataclass
class PropagationTree:
    root_tweet_id: str
    edges: list[tuple[NodeRef, NodeRef]]
    root_user: str = ""

    def __post_init__(self):
        self.node_index: dict[str, list[NodeRef]] = {}
        for parent, child in self.edges:
            for ref in (parent, child):
                if not ref.is_sentinel:
                    self.node_index.setdefault(ref.user_id, []).append(ref)

    def user_edges(self) -> list[tuple[str, str]]:
        """Directed user-level edges, sentinel and self-loops excluded."""
        return [
            (p.user_id, c.user_id)
            for p, c in self.edges
            if not p.is_sentinel and p.user_id != c.user_id
        ]

    def users(self) -> list[str]:
        return list(self.node_index)

    def undirected_adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {u: set() for u in self.node_index}
        for u, v in self.user_edges():
            adj[u].add(v)
            adj[v].add(u)
        return adj


def _detect_root(edges: list[tuple[NodeRef, NodeRef]]) -> str:
    for parent, child in edges:
        if parent.is_sentinel:
            return child.user_id
    parents = {p.user_id for p, _ in edges}
    children = {c.user_id for _, c in edges}
    roots = sorted(parents - children)
    if len(roots) != 1:
        raise TreeFormatError(
            f"expected exactly one root (parent never a child), found {len(roots)}: {roots[:5]}"
        )
    return roots[0]


def parse_tree_file(content: str, tweet_id: str | None = None) -> PropagationTree:
    edges = []
    errors = []
    for lineno, line in enumerate(content.splitlines(), start=1):
        if not line.strip():
            continue
        m = _EDGE_RE.match(line)
        if m is None:
            errors.append(f"line {lineno}: does not match ['uid', 'tid', 't']->['uid', 'tid', 't']")
            continue
        try:
            parent = NodeRef.parse(*m.group(1, 2, 3))
            child = NodeRef.parse(*m.group(4, 5, 6))
        except ValueError as exc:
            errors.append(f"line {lineno}: {exc}")
            continue
        edges.append((parent, child))
    if errors:
        raise TreeFormatError("; ".join(errors))
    if not edges:
        raise TreeFormatError("empty tree file")
    root_user = _detect_root(edges)
    if tweet_id is None:
        first_parent, first_child = edges[0]
        tweet_id = first_child.tweet_id if first_parent.is_sentinel else first_parent.tweet_id
    return PropagationTree(tweet_id, edges, root_user)


def serialize_tree(tree: PropagationTree) -> str:
    return "".join(f"{p.render()}->{c.render()}\n" for p, c in tree.edges)


def load_labels(content: str) -> tuple[dict[str, bool], dict[str, int]]:
    """Parse ``label:tweet_id`` lines, keeping only true/false.

    Returns the retained map (True for "true") and counts of dropped labels.
    """
    labels: dict[str, str] = {}
    for lineno, line in enumerate(content.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        label, sep, tid = line.partition(":")
        label, tid = label.strip().lower(), tid.strip()
        if not sep or not label or not tid:
            raise LabelFormatError(f"line {lineno}: expected 'label:tweet_id', got {line!r}")
        if tid in labels and labels[tid] != label:
            raise LabelFormatError(f"line {lineno}: conflicting labels for {tid}: {labels[tid]} vs {label}")
        labels[tid] = label
    kept: dict[str, bool] = {}
    dropped: dict[str, int] = {}
    for tid, label in labels.items():
        if label in RETAINED_LABELS:
            kept[tid] = label == "true"
        else:
            dropped[label] = dropped.get(label, 0) + 1
    if dropped:
        logger.info("dropped labels: %s", dropped)
    return kept, dropped


def average_degree(tree: PropagationTree) -> float:
    """Mean undirected degree over the tree's users."""
    adj = tree.undirected_adjacency()
    if not adj:
        raise ValueError("empty tree")
    return sum(len(n) for n in adj.values()) / len(adj)


def degree_centrality(tree: PropagationTree) -> dict[str, float]:
    adj = tree.undirected_adjacency()
    n = len(adj)
    if n < 2:
        raise ValueError("degree centrality needs at least two nodes")
    return {u: len(nbrs) / (n - 1) for u, nbrs in adj.items()}


@dataclass(frozen=True)
class HistogramBin:
    low: float
    high: float
    count: int


def histogram(values: Iterable[float], bins: int = 10, log_scale_counts: bool = False) -> list[HistogramBin]:
    """Equal-width bins over [min, max]; ``log_scale_counts`` is a plotting hint only."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("histogram of empty input")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        hi = lo + max(abs(lo), 1.0) * 1e-9
    counts, edges = np.histogram(arr, bins=bins, range=(lo, hi))
    return [HistogramBin(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


@dataclass
class GraphCorpus:
    trees: dict[str, PropagationTree]
    labels: dict[str, bool]

    def __post_init__(self):
        self._user_edges: list[tuple[str, str]] | None = None

    def user_edges(self) -> list[tuple[str, str]]:
        """Union of tree edges keyed by user id, first-seen order, de-duplicated."""
        if self._user_edges is None:
            seen = {}
            for tid in sorted(self.trees):
                for e in self.trees[tid].user_edges():
                    seen.setdefault(e, None)
            self._user_edges = list(seen)
        return self._user_edges

    def users(self) -> list[str]:
        seen = {}
        for tid in sorted(self.trees):
            for u in self.trees[tid].users():
                seen.setdefault(u, None)
        return list(seen)

    def author(self, tweet_id: str) -> str | None:
        tree = self.trees.get(tweet_id)
        return tree.root_user if tree is not None else None


def load_trees(tree_dir: str | Path, ids: Iterable[str] | None = None) -> tuple[dict[str, PropagationTree], list[str]]:
    """Parse ``<tweet_id>.txt`` files; returns trees and the ids that failed to parse."""
    tree_dir = Path(tree_dir)
    if not tree_dir.is_dir():
        raise FileNotFoundError(f"tree directory not found: {tree_dir}")
    wanted = set(ids) if ids is not None else None
    trees, bad = {}, []
    for path in sorted(tree_dir.glob("*.txt")):
        tid = path.stem
        if wanted is not None and tid not in wanted:
            continue
        try:
            trees[tid] = parse_tree_file(path.read_text(encoding="utf-8"), tid)
        except TreeFormatError as exc:
            logger.warning("skipping %s: %s", path.name, exc)
            bad.append(tid)
    return trees, bad


def tree_statistics(trees: Mapping[str, PropagationTree]) -> list[tuple[str, str, float]]:
    """``(stat, id, value)`` rows: sizes, average degree and mean degree centrality per tree."""
    rows = []
    for tid in sorted(trees):
        tree = trees[tid]
        adj = tree.undirected_adjacency()
        rows.append(("nodes", tid, float(len(adj))))
        rows.append(("edges", tid, float(len(tree.edges))))
        rows.append(("average_degree", tid, average_degree(tree)))
        if len(adj) >= 2:
            cent = degree_centrality(tree)
            rows.append(("mean_degree_centrality", tid, float(np.mean(list(cent.values())))))
            rows.append(("max_degree_centrality", tid, max(cent.values())))
    return rows


def tree_to_dot(tree: PropagationTree, name: str | None = None) -> str:
    name = name or f"tree_{tree.root_tweet_id}"
    lines = [f'digraph "{name}" {{']
    for user in tree.users():
        attrs = ' [shape=doublecircle]' if user == tree.root_user else ''
        lines.append(f'  "{user}"{attrs};')
    for p, c in tree.edges:
        if p.is_sentinel:
            continue
        lines.append(f'  "{p.user_id}" -> "{c.user_id}" [label="{c.time_offset:g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


_DOT_TOKEN = re.compile(r'\s*(->|--|[{}\[\];,=]|"(?:[^"\\]|\\.)*"|[A-Za-z_0-9.]+)')


def validate_dot(text: str) -> bool:
    """Check that ``text`` is a single digraph in the DOT subset emitted here.

    Raises ValueError describing the first syntax error.
    """
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _DOT_TOKEN.match(text, pos)
        if m is None:
            raise ValueError(f"unexpected character at offset {pos}: {text[pos:pos + 10]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    it = iter(tokens + [None])
    tok = next(it)

    def advance():
        nonlocal tok
        tok = next(it)

    def expect(value):
        if tok != value:
            raise ValueError(f"expected {value!r}, got {tok!r}")
        advance()

    def ident():
        if tok is None or tok in "{}[];,=" or tok in ("->", "--"):
            raise ValueError(f"expected identifier, got {tok!r}")
        advance()

    def attr_list():
        expect("[")
        while tok != "]":
            ident()
            expect("=")
            ident()
            if tok == ",":
                advance()
        expect("]")

    if tok == "strict":
        advance()
    expect("digraph")
    if tok != "{":
        ident()
    expect("{")
    while tok != "}":
        if tok is None:
            raise ValueError("unterminated graph body")
        ident()
        if tok == "=":
            advance()
            ident()
        else:
            while tok == "->":
                advance()
                ident()
            if tok == "--":
                raise ValueError("undirected edge in digraph")
            if tok == "[":
                attr_list()
        if tok == ";":
            advance()
    expect("}")
    if tok is not None:
        raise ValueError(f"trailing content after graph: {tok!r}")
    return True
