"""Independent reference implementations used by the tests."""

from __future__ import annotations

import numpy as np


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f()`` with respect to every entry of ``x`` (perturbed in place)."""
    g = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b) -> float:
    """||a - b|| / (||a|| + ||b||), 0 when both vanish."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    den = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if den == 0 else float(np.linalg.norm(a - b) / den)


def brute_confusion(pred, true) -> dict[tuple[int, int], int]:
    counts = {(p, t): 0 for p in (0, 1) for t in (0, 1)}
    for p, t in zip(pred, true):
        counts[(int(p), int(t))] += 1
    return counts


def brute_metrics(pred, true) -> dict[str, float]:
    """Macro precision/recall/F1 from per-class one-vs-rest counts, 0/0 taken as 0."""
    cm = brute_confusion(pred, true)
    n = sum(cm.values())
    per_class = []
    for c in (1, 0):
        other = 1 - c
        tp = cm[(c, c)]
        fp = cm[(c, other)]
        fn = cm[(other, c)]
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per_class.append((prec, rec, f1))
    return {
        "accuracy": (cm[(1, 1)] + cm[(0, 0)]) / n,
        "precision": (per_class[0][0] + per_class[1][0]) / 2,
        "recall": (per_class[0][1] + per_class[1][1]) / 2,
        "f1": (per_class[0][2] + per_class[1][2]) / 2,
    }


def two_community_corpus(rng, n_tokens: int = 50, sentences: int = 1000, length: int = 20):
    """Sentences that never mix the id ranges [1, n] and [n + 1, 2n]."""
    out = []
    for s in range(sentences):
        base = 1 if s % 2 == 0 else n_tokens + 1
        out.append((base + rng.integers(0, n_tokens, size=length)).tolist())
    return out


def brute_transition(g, prev, cur, p: float, q: float) -> dict:
    """Next-hop probabilities from ``cur`` having arrived from ``prev``.

    ``g`` is a networkx (Di)Graph; distances are shortest paths in its
    undirected view, so a reverse edge counts as distance 1.
    """
    und = g.to_undirected(as_view=True)
    succ = list(g.successors(cur)) if g.is_directed() else list(g.neighbors(cur))
    weights = {}
    for x in succ:
        if x == cur:
            continue
        d = 0 if x == prev else nx_distance(und, prev, x)
        weights[x] = {0: 1.0 / p, 1: 1.0, 2: 1.0 / q}[min(d, 2)]
    total = sum(weights.values())
    return {x: w / total for x, w in weights.items()}


def nx_distance(und, a, b) -> int:
    import networkx as nx

    try:
        return nx.shortest_path_length(und, a, b)
    except nx.NetworkXNoPath:
        return 3
