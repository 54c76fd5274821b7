"""The two-branch GETAE ensemble.

Text branch: frozen token embeddings -> [Bi]RNN/LSTM/GRU -> dropout.
Propagation branch: frozen author node embedding -> Dense(ReLU).
Ensemble: concat(text, propagation) -> Dense(ReLU) -> Dense(1, sigmoid).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .nn import checkpoint
from .nn.layers import (
    Activation,
    DenseLayerSpec,
    RecurrentKind,
    RecurrentLayerSpec,
    apply_dropout,
    binary_cross_entropy,
    dense_backward,
    dense_forward,
    init_dense,
    init_recurrent,
    recurrent_backward,
    recurrent_forward,
    sigmoid,
    BCE_EPSILON,
)
from .nn.optim import AdamState, OptimizerConfig, adam_update
from .sgns import EmbeddingMatrix
from .text import PretrainedSequenceSet

logger = logging.getLogger(__name__)

WORD2VEC = "Word2Vec"
SIDECAR_VERSION = 1


class NodeModel(str, Enum):
    NONE = "None"
    NODE2VEC = "Node2Vec"
    DEEPWALK = "DeepWalk"


class ConfigMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GetaeConfig:
    bidirection: bool = False
    recurrent: RecurrentKind = RecurrentKind.RNN
    we_model: str = WORD2VEC  # "Word2Vec" or the name of a pretrained sequence source
    ne_model: NodeModel = NodeModel.NODE2VEC
    hidden_units: int = 64  # per direction
    dropout: float = 0.2
    graph_dense: int = 32
    text_dense: int = 32  # post-concatenation Dense
    node_dim: int | None = 100
    epochs: int | None = None  # None: 8 for Word2Vec, 30 otherwise
    batch_size: int = 32
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "recurrent", RecurrentKind(self.recurrent))
        object.__setattr__(self, "ne_model", NodeModel(self.ne_model))
        if isinstance(self.optimizer, dict):
            object.__setattr__(self, "optimizer", OptimizerConfig(**self.optimizer))
        if self.epochs is not None and self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def propagation(self) -> bool:
        return self.ne_model is not NodeModel.NONE

    @property
    def resolved_epochs(self) -> int:
        if self.epochs is not None:
            return self.epochs
        return 8 if self.we_model == WORD2VEC else 30

    def recurrent_spec(self) -> RecurrentLayerSpec:
        return RecurrentLayerSpec(self.recurrent, self.hidden_units, self.bidirection, self.dropout)

    def label(self) -> str:
        layer = ("Bi" if self.bidirection else "") + self.recurrent.value
        return f"{self.we_model}|{self.ne_model.value}|{layer}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["recurrent"] = self.recurrent.value
        d["ne_model"] = self.ne_model.value
        d["optimizer"]["kind"] = self.optimizer.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GetaeConfig":
        return cls(**d)


@dataclass(frozen=True)
class Sample:
    text: np.ndarray  # 1-D token-id row, or (tokens, dim) pretrained vectors
    author: str | None
    label: int  # 1 = fake ("false")

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass
class GetaeModel:
    config: GetaeConfig
    params: dict[str, np.ndarray]
    seq_len: int
    text_dim: int
    word_table: np.ndarray | None = None  # row 0 = padding
    node_table: np.ndarray | None = None  # row 0 = unknown-author fallback
    node_keys: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._node_index = {k: i for i, k in enumerate(self.node_keys, start=1)}

    # -- inputs -------------------------------------------------------------

    def text_batch(self, samples: Sequence[Sample]) -> np.ndarray:
        T = self.seq_len
        out = np.zeros((len(samples), T, self.text_dim))
        for b, s in enumerate(samples):
            t = np.asarray(s.text)
            if t.ndim == 1:
                if self.word_table is None:
                    raise ValueError("token-id sample given to a model without a word table")
                vecs = self.word_table[t.astype(np.int64)]
            else:
                if t.shape[1] != self.text_dim:
                    raise ValueError(f"sequence width {t.shape[1]} != {self.text_dim}")
                vecs = t
            vecs = vecs[-T:]  # keep the last T steps, pad on the left
            if len(vecs):
                out[b, T - len(vecs):] = vecs
        return out

    def node_batch(self, samples: Sequence[Sample]) -> np.ndarray | None:
        if not self.config.propagation:
            return None
        rows = [self._node_index.get(s.author, 0) for s in samples]
        return self.node_table[rows]

    # -- forward / backward -------------------------------------------------

    def _specs(self):
        return (
            self.config.recurrent_spec(),
            DenseLayerSpec(self.config.graph_dense, Activation.RELU),
            DenseLayerSpec(self.config.text_dense, Activation.RELU),
            DenseLayerSpec(1, Activation.SIGMOID),
        )

    def forward_arrays(self, X, Nv, training=False, rng=None):
        rspec, gspec, espec, ospec = self._specs()
        p = self.params
        h, rc = recurrent_forward(X, rspec, _prefixed(p, "text/"))
        h, mask = apply_dropout(h, rspec.dropout, rng, training)
        parts = [h]
        gc = None
        if self.config.propagation:
            g, gc = dense_forward(Nv, gspec, _prefixed(p, "graph_dense/"))
            parts.append(g)
        cat = np.concatenate(parts, axis=1)
        e, ec = dense_forward(cat, espec, _prefixed(p, "ensemble_dense/"))
        z = e @ p["output/W"] + p["output/b"]
        prob = sigmoid(z)[:, 0]
        return prob, (rc, mask, gc, ec, e, h.shape[1], prob)

    def backward(self, cache, labels) -> dict[str, np.ndarray]:
        """Gradients of the batch-mean binary cross-entropy."""
        rc, mask, gc, ec, e, text_width, prob = cache
        rspec, gspec, espec, _ = self._specs()
        p = self.params
        y = np.asarray(labels, dtype=np.float64)
        clamped = (prob < BCE_EPSILON) | (prob > 1.0 - BCE_EPSILON)
        dz = np.where(clamped, 0.0, prob - y)[:, None] / len(y)
        grads = {"output/W": e.T @ dz, "output/b": dz.sum(axis=0)}
        de = dz @ p["output/W"].T
        dcat, g = dense_backward(de, ec, espec, _prefixed(p, "ensemble_dense/"))
        grads.update(_prefix(g, "ensemble_dense/"))
        dh = dcat[:, :text_width]
        if self.config.propagation:
            _, g = dense_backward(dcat[:, text_width:], gc, gspec, _prefixed(p, "graph_dense/"))
            grads.update(_prefix(g, "graph_dense/"))
        if mask is not None:
            dh = dh * mask
        _, g = recurrent_backward(dh, rc, rspec, _prefixed(p, "text/"))
        grads.update(_prefix(g, "text/"))
        return grads

    def forward(self, sample: Sample, training: bool = False, rng=None) -> float:
        prob, _ = self.forward_arrays(self.text_batch([sample]), self.node_batch([sample]), training, rng)
        return float(prob[0])

    def loss_and_grads(self, samples: Sequence[Sample], training=False, rng=None):
        prob, cache = self.forward_arrays(self.text_batch(samples), self.node_batch(samples), training, rng)
        labels = [s.label for s in samples]
        loss = float(binary_cross_entropy(prob, labels).mean())
        return loss, self.backward(cache, labels)

    def predict_proba(self, samples: Sequence[Sample], batch_size: int = 256) -> np.ndarray:
        out = [
            self.forward_arrays(self.text_batch(samples[i:i + batch_size]),
                                self.node_batch(samples[i:i + batch_size]))[0]
            for i in range(0, len(samples), batch_size)
        ]
        return np.concatenate(out) if out else np.zeros(0)


def _prefixed(params, prefix):
    n = len(prefix)
    return {k[n:]: v for k, v in params.items() if k.startswith(prefix)}


def _prefix(d, prefix):
    return {prefix + k: v for k, v in d.items()}


def assemble(
    config: GetaeConfig,
    text_embeddings: np.ndarray | PretrainedSequenceSet | int,
    node_embeddings: EmbeddingMatrix | None = None,
    seq_len: int | None = None,
) -> GetaeModel:
    """Initialize trainable parameters around frozen embedding tables.

    ``text_embeddings`` is the word table W (Word2Vec), a pretrained
    sequence set, or just the pretrained vector width.
    """
    word_table = None
    if isinstance(text_embeddings, np.ndarray):
        word_table = np.array(text_embeddings, dtype=np.float64)
        if word_table.ndim != 2:
            raise ValueError("word table must be 2-D")
        if np.any(word_table[0] != 0):
            raise ValueError("word table row 0 (padding) must be all zeros")
        text_dim = word_table.shape[1]
    elif isinstance(text_embeddings, PretrainedSequenceSet):
        text_dim = text_embeddings.dim
        if seq_len is None:
            seq_len = text_embeddings.longest()
    else:
        text_dim = int(text_embeddings)
    if seq_len is None or seq_len < 1:
        raise ValueError("seq_len must be a positive integer")

    node_table, node_keys = None, []
    if config.propagation:
        if node_embeddings is None:
            raise ConfigMismatchError(f"ne_model={config.ne_model.value} needs node embeddings")
        if config.node_dim is not None and node_embeddings.dim != config.node_dim:
            raise ConfigMismatchError(
                f"node embeddings have dim {node_embeddings.dim}, config expects {config.node_dim}"
            )
        node_table = np.array(node_embeddings.input_vectors, dtype=np.float64)
        node_table[0] = 0.0
        node_keys = node_embeddings.item_keys()

    rng = np.random.default_rng([config.seed, 0])
    rspec = config.recurrent_spec()
    params = _prefix(init_recurrent(text_dim, rspec, rng), "text/")
    width = rspec.output_width
    if config.propagation:
        gspec = DenseLayerSpec(config.graph_dense, Activation.RELU)
        params.update(_prefix(init_dense(node_table.shape[1], gspec, rng), "graph_dense/"))
        width += config.graph_dense
    espec = DenseLayerSpec(config.text_dense, Activation.RELU)
    params.update(_prefix(init_dense(width, espec, rng), "ensemble_dense/"))
    params.update(_prefix(init_dense(config.text_dense, DenseLayerSpec(1, Activation.SIGMOID), rng), "output/"))
    return GetaeModel(config, params, seq_len, text_dim, word_table, node_table, node_keys)


@dataclass
class TrainReport:
    epoch_losses: list[float]
    epoch_accuracies: list[float]
    model: GetaeModel

    @property
    def epochs_run(self) -> int:
        return len(self.epoch_losses)


def train(model: GetaeModel, samples: Sequence[Sample], epochs: int | None = None,
          target_accuracy: float | None = None) -> TrainReport:
    """Mini-batch Adam/SGD on batch-mean BCE; mutates and returns ``model``.

    With ``target_accuracy`` set, stops after the first epoch whose
    inference-mode training accuracy reaches it.
    """
    labels = np.array([s.label for s in samples])
    if len(samples) < 2 or len(set(labels.tolist())) < 2:
        raise ValueError("training needs at least two samples covering both classes")
    cfg = model.config
    epochs = cfg.resolved_epochs if epochs is None else epochs
    rng = np.random.default_rng([cfg.seed, 1])
    state = AdamState()
    losses, accs = [], []
    n = len(samples)
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = [samples[i] for i in order[start:start + cfg.batch_size]]
            loss, grads = model.loss_and_grads(batch, training=True, rng=rng)
            total += loss * len(batch)
            adam_update(model.params, grads, state, cfg.optimizer)
        losses.append(total / n)
        acc = None
        if target_accuracy is not None:
            acc = float(np.mean((model.predict_proba(samples) >= 0.5) == labels))
            accs.append(acc)
        logger.debug("epoch %d loss=%.6f acc=%s", epoch + 1, losses[-1], acc)
        if acc is not None and acc >= target_accuracy:
            break
    return TrainReport(losses, accs, model)


def predict(model: GetaeModel, samples: Sequence[Sample], threshold: float = 0.5):
    """Labels (1 iff probability >= threshold) and probabilities."""
    probs = model.predict_proba(samples)
    return (probs >= threshold).astype(np.int64), probs


def save_model(model: GetaeModel, path: str | Path) -> None:
    """Write the tensor checkpoint at ``path`` and its config sidecar at ``path.json``."""
    path = Path(path)
    tensors = dict(model.params)
    if model.word_table is not None:
        tensors["frozen/word_table"] = model.word_table
    if model.node_table is not None:
        tensors["frozen/node_table"] = model.node_table
    checkpoint.save_tensors(path, tensors)
    sidecar = {
        "version": SIDECAR_VERSION,
        "config": model.config.to_dict(),
        "seq_len": model.seq_len,
        "text_dim": model.text_dim,
        "node_keys": model.node_keys,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=1, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path, expected: GetaeConfig | None = None) -> GetaeModel:
    path = Path(path)
    sidecar_path = Path(str(path) + ".json")
    try:
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise checkpoint.CheckpointError(f"missing config sidecar {sidecar_path}") from None
    if sidecar.get("version") != SIDECAR_VERSION:
        raise checkpoint.CheckpointError(f"unsupported sidecar version {sidecar.get('version')}")
    config = GetaeConfig.from_dict(sidecar["config"])
    if expected is not None:
        if expected.propagation != config.propagation:
            raise ConfigMismatchError(
                f"checkpoint has ne_model={config.ne_model.value}, requested {expected.ne_model.value}"
            )
        if (expected.recurrent, expected.bidirection) != (config.recurrent, config.bidirection):
            raise ConfigMismatchError(f"checkpoint is {config.label()}, requested {expected.label()}")
    tensors = checkpoint.load_tensors(path)
    word_table = tensors.pop("frozen/word_table", None)
    node_table = tensors.pop("frozen/node_table", None)
    if config.propagation and node_table is None:
        raise checkpoint.CheckpointError("checkpoint lacks the node table its config requires")
    model = GetaeModel(config, tensors, sidecar["seq_len"], sidecar["text_dim"], word_table, node_table,
                       list(sidecar["node_keys"]))
    template = assemble(
        replace(config, node_dim=None),
        sidecar["text_dim"],
        EmbeddingMatrix(node_table, np.zeros_like(node_table), model.node_keys) if node_table is not None else None,
        seq_len=sidecar["seq_len"],
    )
    expected_shapes = {k: v.shape for k, v in template.params.items()}
    actual_shapes = {k: v.shape for k, v in tensors.items()}
    if expected_shapes != actual_shapes:
        raise checkpoint.CheckpointError("checkpoint tensors do not match the configured architecture")
    return model
