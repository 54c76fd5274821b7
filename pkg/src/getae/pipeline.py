"""Embedding training and sample assembly for a loaded dataset.

Word2Vec tables and node embeddings are trained once per parameter set
and cached; pretrained sequence sets are loaded once per source name.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .model import WORD2VEC, NodeModel, Sample
from .sgns import EmbeddingMatrix, SgnsConfig, train_sgns
from .text import (
    DocTokenMatrix,
    PretrainedSequenceSet,
    TextMode,
    Vocabulary,
    build_vocabulary,
    encode_documents,
    load_pretrained_sequences,
    preprocess_text,
)
from .walks import WalkConfig, WalkGraph, WalkMode, generate_walks

logger = logging.getLogger(__name__)


class MissingArtifactError(LookupError):
    pass


def derive_seed(root: int, *parts) -> int:
    """Stable 63-bit sub-seed for a named subsystem."""
    h = hashlib.blake2b(repr((root,) + parts).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


@dataclass(frozen=True)
class Word2VecParams:
    dim: int = 100
    window: int = 10
    min_count: int = 4
    learning_rate: float = 0.025
    epochs: int = 5
    negatives: int = 5
    noise_power: float = 0.75


@dataclass(frozen=True)
class NodeEmbeddingParams:
    kind: NodeModel = NodeModel.NODE2VEC
    dim: int = 100
    window: int = 10
    min_count: int = 1
    walk_length: int = 10
    walks_per_node: int = 10
    learning_rate: float = 0.05
    epochs: int = 1
    p: float = 1.0
    q: float = 1.0
    negatives: int = 5
    noise_power: float = 0.75
    directed: bool = True
    scope: str = "global"  # "global" user graph or disjoint per-"tree" graphs

    def __post_init__(self):
        object.__setattr__(self, "kind", NodeModel(self.kind))
        if self.kind is NodeModel.NONE:
            raise ValueError("no node embedding parameters for ne_model=None")
        if self.scope not in ("global", "tree"):
            raise ValueError("scope must be 'global' or 'tree'")


NODE2VEC_DEFAULTS = NodeEmbeddingParams(NodeModel.NODE2VEC, window=10)
DEEPWALK_DEFAULTS = NodeEmbeddingParams(NodeModel.DEEPWALK, window=5)


def preprocess_corpus(dataset: Dataset, mode: TextMode = TextMode.WORD2VEC) -> list[list[str]]:
    return [preprocess_text(d.text, mode) for d in dataset.documents]


@dataclass
class WordEmbeddingArtifact:
    vocab: Vocabulary
    matrix: EmbeddingMatrix
    doc_tokens: DocTokenMatrix  # rows follow dataset.documents


def train_word2vec(dataset: Dataset, params: Word2VecParams, seed: int = 0) -> WordEmbeddingArtifact:
    tokens = preprocess_corpus(dataset, TextMode.WORD2VEC)
    vocab = build_vocabulary(tokens, params.min_count)
    D = encode_documents(tokens, vocab)
    sequences = [D.row_ids(i) for i in range(D.n)]
    cfg = SgnsConfig(dim=params.dim, window=params.window, negatives=params.negatives,
                     learning_rate=params.learning_rate, epochs=params.epochs,
                     noise_power=params.noise_power, seed=seed)
    matrix = train_sgns(sequences, cfg, num_items=len(vocab), keys=vocab.tokens())
    return WordEmbeddingArtifact(vocab, matrix, D)


def node_graph(dataset: Dataset, params: NodeEmbeddingParams) -> WalkGraph:
    corpus = dataset.corpus
    if params.scope == "global":
        return WalkGraph(corpus.user_edges(), corpus.users(), directed=params.directed)
    edges, nodes = [], []
    for tid in sorted(corpus.trees):
        tree = corpus.trees[tid]
        nodes += [f"{tid}/{u}" for u in tree.users()]
        edges += [(f"{tid}/{u}", f"{tid}/{v}") for u, v in tree.user_edges()]
    return WalkGraph(edges, nodes, directed=params.directed)


def author_key(dataset: Dataset, doc_index: int, params: NodeEmbeddingParams | None) -> str | None:
    doc = dataset.documents[doc_index]
    if not doc.author:
        return None
    if params is not None and params.scope == "tree":
        return f"{doc.id}/{doc.author}"
    return doc.author


def train_node_embeddings(dataset: Dataset, params: NodeEmbeddingParams, seed: int = 0) -> EmbeddingMatrix:
    graph = node_graph(dataset, params)
    mode = WalkMode.SECOND_ORDER if params.kind is NodeModel.NODE2VEC else WalkMode.FIRST_ORDER
    wcfg = WalkConfig(params.walk_length, params.walks_per_node, params.p, params.q,
                      derive_seed(seed, "walks"), mode, params.directed)
    walks = generate_walks(graph, wcfg)
    counts = np.zeros(len(graph), dtype=np.int64)
    for w in walks:
        np.add.at(counts, w, 1)
    kept = [i for i in range(len(graph)) if counts[i] >= params.min_count]
    remap = np.zeros(len(graph), dtype=np.int64)
    remap[kept] = np.arange(1, len(kept) + 1)
    sequences = []
    for w in walks:
        ids = remap[w]
        sequences.append(ids[ids > 0])
    cfg = SgnsConfig(dim=params.dim, window=params.window, negatives=params.negatives,
                     learning_rate=params.learning_rate, epochs=params.epochs,
                     noise_power=params.noise_power, seed=derive_seed(seed, "sgns"))
    keys = [str(graph.keys[i]) for i in kept]
    logger.info("%s: %d nodes, %d walks", params.kind.value, len(keys), len(walks))
    return train_sgns(sequences, cfg, num_items=len(keys), keys=keys)


@dataclass
class TextInputs:
    """Everything the text branch needs for one word-embedding source."""

    embeddings: np.ndarray | PretrainedSequenceSet
    texts: list[np.ndarray]  # one entry per dataset document
    seq_len: int


class EmbeddingStore:
    def __init__(self, dataset: Dataset, word2vec: Word2VecParams = Word2VecParams(),
                 sequence_paths: dict[str, str | Path] | None = None, seed: int = 0):
        self.dataset = dataset
        self.word2vec = word2vec
        self.sequence_paths = {k: Path(v) for k, v in (sequence_paths or {}).items()}
        self.seed = seed
        self._text: dict[str, TextInputs] = {}
        self._nodes: dict[NodeEmbeddingParams, EmbeddingMatrix] = {}

    def _sequence_path(self, name: str) -> Path:
        for key, path in self.sequence_paths.items():
            if key.lower() == name.lower():
                if not path.exists():
                    raise MissingArtifactError(f"sequence file for {name} not found: {path}")
                return path
        path = self.dataset.sequence_path(name)
        if path is None:
            raise MissingArtifactError(f"no pretrained sequence file for word embedding {name!r}")
        return path

    def text(self, we_model: str) -> TextInputs:
        if we_model in self._text:
            return self._text[we_model]
        if we_model == WORD2VEC:
            art = train_word2vec(self.dataset, self.word2vec, derive_seed(self.seed, "word2vec"))
            W = art.matrix.input_vectors
            texts = [art.doc_tokens.values[i] for i in range(art.doc_tokens.n)]
            inputs = TextInputs(W, texts, max(art.doc_tokens.k, 1))
        else:
            seqs = load_pretrained_sequences(self._sequence_path(we_model))
            missing = [d.id for d in self.dataset.documents if d.id not in seqs]
            if missing:
                raise MissingArtifactError(f"{we_model}: {len(missing)} documents lack sequences, e.g. {missing[:3]}")
            texts = [seqs[d.id] for d in self.dataset.documents]
            inputs = TextInputs(seqs, texts, max(seqs.longest(), 1))
        self._text[we_model] = inputs
        return inputs

    def nodes(self, params: NodeEmbeddingParams) -> EmbeddingMatrix:
        if params not in self._nodes:
            self._nodes[params] = train_node_embeddings(self.dataset, params, derive_seed(self.seed, "nodes", params.kind.value))
        return self._nodes[params]

    def samples(self, we_model: str, node_params: NodeEmbeddingParams | None) -> list[Sample]:
        texts = self.text(we_model).texts
        labels = self.dataset.labels()
        return [
            Sample(texts[i], author_key(self.dataset, i, node_params), int(labels[i]))
            for i in range(len(texts))
        ]


def node_params_for(kind: NodeModel, base: dict[NodeModel, NodeEmbeddingParams] | None = None,
                    **overrides) -> NodeEmbeddingParams | None:
    kind = NodeModel(kind)
    if kind is NodeModel.NONE:
        return None
    defaults = base or {NodeModel.NODE2VEC: NODE2VEC_DEFAULTS, NodeModel.DEEPWALK: DEEPWALK_DEFAULTS}
    return replace(defaults[kind], **overrides)
