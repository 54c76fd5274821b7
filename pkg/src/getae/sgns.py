"""Skip-gram with negative sampling over integer sequences.

Shared by word embeddings (token-id documents) and node embeddings (walk
corpora). Ids start at 1; row 0 of every table is the all-zero padding
vector and never receives updates.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .alias import AliasTable, build_alias_table

logger = logging.getLogger(__name__)

MIN_LEARNING_RATE = 1e-4


class EmptyCorpusError(ValueError):
    pass


class EmbeddingFileError(ValueError):
    pass


@dataclass(frozen=True)
class SgnsConfig:
    dim: int = 100
    window: int = 10
    negatives: int = 5
    learning_rate: float = 0.025
    epochs: int = 5
    noise_power: float = 0.75
    seed: int = 0
    workers: int = 1  # >1 enables lock-free (non-deterministic) updates

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class EmbeddingMatrix:
    """Input (exported) and output (context) tables, row 0 reserved for padding."""

    input_vectors: np.ndarray
    output_vectors: np.ndarray
    keys: list[str] | None = None  # keys[i] names row i + 1
    epoch_losses: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.input_vectors.shape != self.output_vectors.shape:
            raise ValueError("input and output tables must have identical shape")
        if self.keys is not None and len(self.keys) != self.num_items:
            raise ValueError(f"{len(self.keys)} keys for {self.num_items} items")

    @property
    def num_items(self) -> int:
        return self.input_vectors.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    def item_keys(self) -> list[str]:
        return list(self.keys) if self.keys is not None else [str(i) for i in range(1, self.num_items + 1)]

    def index(self) -> dict[str, int]:
        return {k: i for i, k in enumerate(self.item_keys(), start=1)}

    def vector(self, key: str) -> np.ndarray:
        return self.input_vectors[self.index()[key]]


class NoiseDistribution:
    """Negative-sampling distribution proportional to count ** power over ids >= 1."""

    def __init__(self, counts: np.ndarray, power: float = 0.75):
        counts = np.asarray(counts, dtype=np.float64)
        if counts.ndim != 1 or counts.size < 2:
            raise ValueError("counts must cover the padding id plus at least one item")
        weights = np.zeros_like(counts)
        weights[1:] = np.power(counts[1:], power, where=counts[1:] > 0, out=np.zeros(counts.size - 1))
        total = weights.sum()
        if total <= 0:
            raise EmptyCorpusError("noise distribution has no support")
        self.probs = weights / total
        self.table: AliasTable = build_alias_table(self.probs)

    @classmethod
    def from_sequences(cls, sequences: Sequence[Sequence[int]], num_items: int, power: float = 0.75):
        counts = np.zeros(num_items + 1)
        for seq in sequences:
            np.add.at(counts, np.asarray(seq, dtype=np.int64), 1)
        counts[0] = 0
        return cls(counts, power)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.table.sample_many(rng, size)


def generate_skipgram_pairs(sequences: Sequence[Sequence[int]], window: int) -> list[tuple[int, int]]:
    pairs = []
    for seq in sequences:
        n = len(seq)
        for i in range(n):
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if j != i:
                    pairs.append((seq[i], seq[j]))
    return pairs


@numba.njit(cache=True)
def _pair_arrays(flat, offsets, window):
    total = 0
    for s in range(offsets.shape[0] - 1):
        n = offsets[s + 1] - offsets[s]
        for i in range(n):
            total += min(n, i + window + 1) - max(0, i - window) - 1
    centers = np.empty(total, dtype=np.int64)
    contexts = np.empty(total, dtype=np.int64)
    p = 0
    for s in range(offsets.shape[0] - 1):
        base = offsets[s]
        n = offsets[s + 1] - base
        for i in range(n):
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if j != i:
                    centers[p] = flat[base + i]
                    contexts[p] = flat[base + j]
                    p += 1
    return centers, contexts


def skipgram_pair_arrays(sequences: Sequence[Sequence[int]], window: int) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`generate_skipgram_pairs`, same order."""
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    flat = np.concatenate([np.asarray(s, dtype=np.int64) for s in sequences]) if len(sequences) else np.zeros(0, np.int64)
    return _pair_arrays(flat, offsets, window)


def sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


def log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def sgns_pair_loss(center_vec, context_vec, negative_vecs) -> float:
    """-log s(c.o) - sum_n log s(-c.n)."""
    c = np.asarray(center_vec, dtype=np.float64)
    loss = -log_sigmoid(float(c @ np.asarray(context_vec, dtype=np.float64)))
    for n in negative_vecs:
        loss -= log_sigmoid(-float(c @ np.asarray(n, dtype=np.float64)))
    return float(loss)


def sgns_gradients(matrix: EmbeddingMatrix, center: int, context: int, negatives: Sequence[int]):
    """Loss and analytic gradients for one (center, context) pair.

    Returns ``(loss, grad_center, out_rows, out_grads)``; ``out_rows`` may
    repeat, and gradients for repeated rows must be summed.
    """
    c = matrix.input_vectors[center]
    rows = np.concatenate(([context], np.asarray(negatives, dtype=np.int64)))
    outs = matrix.output_vectors[rows]
    scores = outs @ c
    signs = np.ones(rows.size)
    signs[0] = -1.0
    # d loss / d score: s(score) - 1 for the positive, s(score) for negatives
    coeff = sigmoid(scores)
    coeff[0] -= 1.0
    loss = -log_sigmoid(-signs * scores).sum()
    grad_center = coeff @ outs
    out_grads = coeff[:, None] * c[None, :]
    return float(loss), grad_center, rows, out_grads


def sgns_step(
    matrix: EmbeddingMatrix,
    pair: tuple[int, int],
    noise: NoiseDistribution | None,
    config: SgnsConfig,
    rng: np.random.Generator | None = None,
    negatives: Sequence[int] | None = None,
    learning_rate: float | None = None,
) -> tuple[EmbeddingMatrix, float]:
    """One SGD update on ``pair``; returns the matrix and the pre-update loss.

    Negatives are drawn from ``noise`` unless given explicitly.
    """
    center, context = int(pair[0]), int(pair[1])
    if negatives is None:
        if noise is None or rng is None:
            raise ValueError("either explicit negatives or a noise distribution and rng are required")
        negatives = noise.sample(rng, config.negatives)
    negatives = np.asarray(negatives, dtype=np.int64)
    n_rows = matrix.input_vectors.shape[0]
    touched = np.concatenate(([center, context], negatives))
    if np.any(touched <= 0):
        raise ValueError("pair or negative touches the padding row")
    if np.any(touched >= n_rows):
        raise IndexError("id outside the embedding matrix")
    lr = config.learning_rate if learning_rate is None else learning_rate
    loss, grad_center, rows, out_grads = sgns_gradients(matrix, center, context, negatives)
    matrix.input_vectors[center] -= lr * grad_center
    np.add.at(matrix.output_vectors, rows, -lr * out_grads)
    return matrix, loss


@numba.njit(cache=True)
def _sgd_range(win, wout, centers, contexts, negs, order, start, stop, lr):
    dim = win.shape[1]
    k = negs.shape[1]
    grad_c = np.empty(dim)
    coeff = np.empty(k + 1)
    rows = np.empty(k + 1, dtype=np.int64)
    total = 0.0
    for t in range(start, stop):
        p = order[t]
        c = centers[p]
        rows[0] = contexts[p]
        rows[1:] = negs[p]
        # all gradients use pre-update values, as in sgns_step
        grad_c[:] = 0.0
        for j in range(k + 1):
            score = 0.0
            for d in range(dim):
                score += win[c, d] * wout[rows[j], d]
            if j == 0:
                total += np.logaddexp(0.0, -score)
                coeff[j] = 1.0 / (1.0 + np.exp(-score)) - 1.0
            else:
                total += np.logaddexp(0.0, score)
                coeff[j] = 1.0 / (1.0 + np.exp(-score))
            for d in range(dim):
                grad_c[d] += coeff[j] * wout[rows[j], d]
        for j in range(k + 1):
            for d in range(dim):
                wout[rows[j], d] -= lr * coeff[j] * win[c, d]
        for d in range(dim):
            win[c, d] -= lr * grad_c[d]
    return total


@numba.njit(cache=True, parallel=True)
def _sgd_hogwild(win, wout, centers, contexts, negs, order, lr, chunks):
    n = order.shape[0]
    size = (n + chunks - 1) // chunks
    partial = np.zeros(chunks)
    for w in numba.prange(chunks):
        partial[w] = _sgd_range(win, wout, centers, contexts, negs, order, w * size, min(n, (w + 1) * size), lr)
    return partial.sum()


def epoch_learning_rates(config: SgnsConfig) -> list[float]:
    """Linear decay from the configured rate to 1e-4 across epochs."""
    if config.epochs == 1:
        return [config.learning_rate]
    lo = min(MIN_LEARNING_RATE, config.learning_rate)
    step = (config.learning_rate - lo) / (config.epochs - 1)
    return [config.learning_rate - e * step for e in range(config.epochs)]


def train_sgns(
    sequences: Sequence[Sequence[int]],
    config: SgnsConfig,
    num_items: int | None = None,
    keys: Sequence[str] | None = None,
) -> EmbeddingMatrix:
    """Train input/output tables over all skip-gram pairs of ``sequences``.

    Deterministic for a fixed seed when ``config.workers == 1``.
    """
    seqs = [np.asarray(s, dtype=np.int64) for s in sequences if len(s)]
    if not seqs:
        raise EmptyCorpusError("no sequences to train on")
    max_id = max(int(s.max()) for s in seqs)
    if min(int(s.min()) for s in seqs) < 1:
        raise ValueError("sequence ids must be >= 1 (0 is padding)")
    if num_items is None:
        num_items = len(keys) if keys is not None else max_id
    if max_id > num_items:
        raise ValueError(f"id {max_id} exceeds num_items={num_items}")

    centers, contexts = skipgram_pair_arrays(seqs, config.window)
    if centers.size == 0:
        raise EmptyCorpusError("corpus yields no skip-gram pairs")
    noise = NoiseDistribution.from_sequences(seqs, num_items, config.noise_power)

    rng = np.random.default_rng(config.seed)
    win = (rng.random((num_items + 1, config.dim)) - 0.5) / config.dim
    win[0] = 0.0
    wout = np.zeros_like(win)
    matrix = EmbeddingMatrix(win, wout, list(keys) if keys is not None else None)

    n_pairs = centers.size
    for epoch, lr in enumerate(epoch_learning_rates(config)):
        order = rng.permutation(n_pairs)
        negs = noise.sample(rng, n_pairs * config.negatives).reshape(n_pairs, config.negatives)
        if config.workers == 1:
            total = _sgd_range(win, wout, centers, contexts, negs, order, 0, n_pairs, lr)
        else:
            total = _sgd_hogwild(win, wout, centers, contexts, negs, order, lr, config.workers)
        matrix.epoch_losses.append(total / n_pairs)
        logger.info("sgns epoch %d/%d lr=%.5f loss=%.6f", epoch + 1, config.epochs, lr, total / n_pairs)
    return matrix


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity undefined for a zero-norm vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def write_embeddings(path: str | Path, matrix: EmbeddingMatrix) -> None:
    """``items=<m> dim=<s>`` header, then ``key<TAB>v1 v2 ... vs`` per item."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"items={matrix.num_items} dim={matrix.dim}\n")
        for i, key in enumerate(matrix.item_keys(), start=1):
            if "\t" in key or "\n" in key:
                raise EmbeddingFileError(f"item key {key!r} contains a tab or newline")
            fh.write(key + "\t" + " ".join(repr(float(v)) for v in matrix.input_vectors[i]) + "\n")


def read_embeddings(path: str | Path) -> EmbeddingMatrix:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().strip()
        m = re.fullmatch(r"items=(\d+) dim=(\d+)", header)
        if m is None:
            raise EmbeddingFileError(f"{path}: bad header {header!r}")
        items, dim = int(m.group(1)), int(m.group(2))
        table = np.zeros((items + 1, dim))
        keys = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            key, sep, payload = line.partition("\t")
            if not sep:
                raise EmbeddingFileError(f"{path}:{lineno}: missing tab separator")
            values = payload.split(" ")
            if len(values) != dim:
                raise EmbeddingFileError(f"{path}:{lineno}: expected {dim} values, got {len(values)}")
            if len(keys) >= items:
                raise EmbeddingFileError(f"{path}:{lineno}: more than {items} items")
            keys.append(key)
            table[len(keys)] = [float(v) for v in values]
    if len(keys) != items:
        raise EmbeddingFileError(f"{path}: header promises {items} items, found {len(keys)}")
    if len(set(keys)) != len(keys):
        raise EmbeddingFileError(f"{path}: duplicate item keys")
    return EmbeddingMatrix(table, np.zeros_like(table), keys)
