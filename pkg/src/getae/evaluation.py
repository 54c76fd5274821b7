"""Stratified folds, classification metrics, ablation and tuning grids."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .model import WORD2VEC, GetaeConfig, NodeModel, assemble, predict, train
from .nn.layers import RecurrentKind
from .pipeline import EmbeddingStore, NodeEmbeddingParams, derive_seed, node_params_for

logger = logging.getLogger(__name__)

METRICS = ("accuracy", "precision", "recall", "f1")


# -- splits -----------------------------------------------------------------

@dataclass
class FoldSplit:
    folds: list[np.ndarray]  # test indices per fold
    n: int
    protocol: str = "kfold"

    def __len__(self) -> int:
        return len(self.folds)

    def train_test(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.folds[i]
        mask = np.ones(self.n, dtype=bool)
        mask[test] = False
        return np.flatnonzero(mask), np.sort(test)


def stratified_kfold(labels, k: int = 10, seed: int = 0) -> FoldSplit:
    """Shuffle each class with ``seed`` and deal its members round-robin over ``k`` folds.

    Dealing continues across classes, so fold sizes differ by at most one.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.size < k:
            raise ValueError(f"class {cls!r} has {members.size} samples, fewer than k={k}")
        for idx in rng.permutation(members):
            folds[pos % k].append(int(idx))
            pos += 1
    return FoldSplit([np.array(sorted(f), dtype=np.int64) for f in folds], labels.size, "kfold")


def holdout_split(labels, test_fraction: float = 0.2, seed: int = 0) -> FoldSplit:
    """Single stratified train/test split (80-20 by default)."""
    labels = np.asarray(labels)
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    test = []
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        n_test = int(round(members.size * test_fraction))
        if n_test == 0 or n_test == members.size:
            raise ValueError(f"class {cls!r} too small for a {test_fraction:.0%} holdout")
        test += members[:n_test].tolist()
    return FoldSplit([np.array(sorted(test), dtype=np.int64)], labels.size, "holdout")


# -- metrics ----------------------------------------------------------------

@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int

    def as_dict(self) -> dict[str, float]:
        return {m: getattr(self, m) for m in METRICS}


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def compute_metrics(predictions, labels) -> MetricsReport:
    """Accuracy plus macro-averaged (over classes 0 and 1) precision, recall and F1."""
    pred = np.asarray(predictions).astype(np.int64)
    true = np.asarray(labels).astype(np.int64)
    if pred.shape != true.shape:
        raise ValueError("predictions and labels differ in length")
    if pred.size == 0:
        raise ValueError("no predictions")
    if not (np.isin(pred, (0, 1)).all() and np.isin(true, (0, 1)).all()):
        raise ValueError("predictions and labels must be 0/1")
    tp = int(np.sum((pred == 1) & (true == 1)))
    fp = int(np.sum((pred == 1) & (true == 0)))
    fn = int(np.sum((pred == 0) & (true == 1)))
    tn = int(np.sum((pred == 0) & (true == 0)))
    precisions, recalls, f1s = [], [], []
    # class 1 then class 0 (roles of tp/tn and fp/fn swap)
    for t, f_pos, f_neg in ((tp, fp, fn), (tn, fn, fp)):
        p = _ratio(t, t + f_pos)
        r = _ratio(t, t + f_neg)
        precisions.append(p)
        recalls.append(r)
        f1s.append(_ratio(2 * p * r, p + r) if p + r else 0.0)
    return MetricsReport(
        accuracy=(tp + tn) / pred.size,
        precision=sum(precisions) / 2,
        recall=sum(recalls) / 2,
        f1=sum(f1s) / 2,
        tp=tp, fp=fp, fn=fn, tn=tn,
    )


@dataclass
class SummaryRow:
    config: str
    mean: dict[str, float]
    std: dict[str, float]
    fold_values: dict[str, list[float]]
    protocol: str = "kfold"
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "protocol": self.protocol,
            "details": self.details,
            "mean": self.mean,
            "std": self.std,
            "fold_values": self.fold_values,
        }


def aggregate(reports: Sequence[MetricsReport], config: str = "", protocol: str = "kfold",
              details: dict | None = None) -> SummaryRow:
    """Mean and sample (n-1) standard deviation per metric; std is 0 for a single report.

    Arithmetic is exact (rationals) until the final rounding, so the result
    does not depend on fold order and identical folds give a std of exactly 0.
    """
    if not reports:
        raise ValueError("nothing to aggregate")
    values = {m: [getattr(r, m) for r in reports] for m in METRICS}
    n = len(reports)
    mean, std = {}, {}
    for m, v in values.items():
        exact = [Fraction(x) for x in v]
        mu = sum(exact) / n
        mean[m] = float(mu)
        std[m] = math.sqrt(float(sum((x - mu) ** 2 for x in exact) / (n - 1))) if n > 1 else 0.0
    return SummaryRow(config, mean, std, values, protocol, dict(details or {}))


# -- grids ------------------------------------------------------------------

WORD_MODELS = (WORD2VEC, "BERT", "BERTweet")
NODE_MODELS = (NodeModel.NONE, NodeModel.NODE2VEC, NodeModel.DEEPWALK)
RECURRENT_KINDS = (RecurrentKind.RNN, RecurrentKind.GRU, RecurrentKind.LSTM)
NODE2VEC_PQ = ((1.0, 1.0), (1.0, 0.5), (0.5, 1.0), (0.5, 0.5), (2.0, 1.0), (1.0, 2.0))
TUNING_DIMS = (32, 100)


@dataclass(frozen=True)
class GridCell:
    config: GetaeConfig
    node_params: NodeEmbeddingParams | None
    details: tuple = ()

    @property
    def label(self) -> str:
        extra = ",".join(f"{k}={v}" for k, v in self.details)
        return self.config.label() + (f"|{extra}" if extra else "")


@dataclass(frozen=True)
class AblationGrid:
    we_models: tuple[str, ...] = WORD_MODELS
    ne_models: tuple[NodeModel, ...] = NODE_MODELS
    recurrents: tuple[RecurrentKind, ...] = RECURRENT_KINDS
    bidirections: tuple[bool, ...] = (False, True)

    def __len__(self) -> int:
        return len(self.we_models) * len(self.ne_models) * len(self.recurrents) * len(self.bidirections)

    def cells(self, base: GetaeConfig, node_defaults: dict | None = None) -> list[GridCell]:
        out = []
        for we, ne, rec, bi in itertools.product(self.we_models, self.ne_models, self.recurrents, self.bidirections):
            ne = NodeModel(ne)
            params = node_params_for(ne, node_defaults)
            cfg = replace(base, we_model=we, ne_model=ne, recurrent=RecurrentKind(rec), bidirection=bi,
                          node_dim=params.dim if params else base.node_dim)
            out.append(GridCell(cfg, params))
        return out


def node2vec_tuning_cells(base: GetaeConfig, node_defaults: dict | None = None) -> list[GridCell]:
    """Every (p, q) pair at d = 32 and d = 100: 12 cells."""
    out = []
    for d in TUNING_DIMS:
        for p, q in NODE2VEC_PQ:
            params = node_params_for(NodeModel.NODE2VEC, node_defaults, p=p, q=q, dim=d)
            cfg = replace(base, ne_model=NodeModel.NODE2VEC, node_dim=d)
            out.append(GridCell(cfg, params, (("p", p), ("q", q), ("d", d))))
    return out


def deepwalk_tuning_cells(base: GetaeConfig, node_defaults: dict | None = None) -> list[GridCell]:
    """d in {32, 100} times the six recurrent layers: 12 cells."""
    out = []
    for d in TUNING_DIMS:
        for rec in RECURRENT_KINDS:
            for bi in (False, True):
                params = node_params_for(NodeModel.DEEPWALK, node_defaults, dim=d)
                cfg = replace(base, ne_model=NodeModel.DEEPWALK, node_dim=d, recurrent=rec, bidirection=bi)
                out.append(GridCell(cfg, params, (("d", d),)))
    return out


# -- running ----------------------------------------------------------------

@dataclass(frozen=True)
class EvalProtocol:
    kind: str = "kfold"  # or "holdout"
    k: int = 10
    test_fraction: float = 0.2
    seed: int = 0

    def split(self, labels) -> FoldSplit:
        if self.kind == "kfold":
            return stratified_kfold(labels, self.k, self.seed)
        if self.kind == "holdout":
            return holdout_split(labels, self.test_fraction, self.seed)
        raise ValueError(f"unknown protocol {self.kind!r}")


_JOB_CONTEXT: dict = {}


def _run_fold(job):
    cell_idx, fold = job
    store: EmbeddingStore = _JOB_CONTEXT["store"]
    cell: GridCell = _JOB_CONTEXT["cells"][cell_idx]
    split: FoldSplit = _JOB_CONTEXT["split"]
    seed = _JOB_CONTEXT["seed"]
    samples = store.samples(cell.config.we_model, cell.node_params)
    text = store.text(cell.config.we_model)
    nodes = store.nodes(cell.node_params) if cell.node_params is not None else None
    cfg = replace(cell.config, seed=derive_seed(seed, cell.label, fold))
    train_idx, test_idx = split.train_test(fold)
    model = assemble(cfg, text.embeddings, nodes, seq_len=text.seq_len)
    train(model, [samples[i] for i in train_idx])
    test = [samples[i] for i in test_idx]
    pred, _ = predict(model, test)
    return compute_metrics(pred, [s.label for s in test])


def run_cells(store: EmbeddingStore, cells: Sequence[GridCell], protocol: EvalProtocol = EvalProtocol(),
              seed: int = 0, workers: int = 1,
              progress: Callable[[int, int], None] | None = None) -> list[SummaryRow]:
    """Evaluate every cell under one shared split; one SummaryRow per cell."""
    labels = store.dataset.labels()
    split = protocol.split(labels)
    # train shared embeddings up front so worker processes inherit them
    for cell in cells:
        store.text(cell.config.we_model)
        if cell.node_params is not None:
            store.nodes(cell.node_params)
    _JOB_CONTEXT.update(store=store, cells=list(cells), split=split, seed=seed)
    jobs = [(c, f) for c in range(len(cells)) for f in range(len(split))]
    try:
        if workers > 1:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(workers, mp_context=ctx) as pool:
                results = list(pool.map(_run_fold, jobs))
        else:
            results = []
            for i, job in enumerate(jobs):
                results.append(_run_fold(job))
                if progress:
                    progress(i + 1, len(jobs))
    finally:
        _JOB_CONTEXT.clear()
    rows = []
    for c, cell in enumerate(cells):
        reports = results[c * len(split):(c + 1) * len(split)]
        details = {
            "we_model": cell.config.we_model,
            "ne_model": cell.config.ne_model.value,
            "recurrent": cell.config.recurrent.value,
            "bidirection": cell.config.bidirection,
            **dict(cell.details),
        }
        rows.append(aggregate(reports, cell.label, split.protocol, details))
    return rows


def run_ablation(store: EmbeddingStore, grid: AblationGrid, base_config: GetaeConfig,
                 protocol: EvalProtocol = EvalProtocol(), seed: int = 0, workers: int = 1,
                 node_defaults: dict | None = None) -> list[SummaryRow]:
    return run_cells(store, grid.cells(base_config, node_defaults), protocol, seed, workers)


# -- output -----------------------------------------------------------------

def rows_to_csv(rows: Sequence[SummaryRow]) -> str:
    n_folds = max((len(r.fold_values["accuracy"]) for r in rows), default=0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["config", "metric", "mean", "std"] + [f"fold_{i + 1}" for i in range(n_folds)])
    for r in rows:
        for m in METRICS:
            w.writerow([r.config, m, repr(r.mean[m]), repr(r.std[m])] + [repr(v) for v in r.fold_values[m]])
    return buf.getvalue()


def rows_to_json(rows: Sequence[SummaryRow]) -> str:
    return json.dumps([r.as_dict() for r in rows], indent=1, sort_keys=True) + "\n"


def write_results(rows: Sequence[SummaryRow], out_dir: str | Path, stem: str) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.json"
    csv_path.write_text(rows_to_csv(rows), encoding="utf-8")
    json_path.write_text(rows_to_json(rows), encoding="utf-8")
    return csv_path, json_path


def _cell(row: SummaryRow | None, metric: str) -> str:
    if row is None:
        return "-"
    return f"{row.mean[metric]:.3f} ± {row.std[metric]:.3f}"


def format_ablation_table(rows: Sequence[SummaryRow]) -> str:
    """Markdown in the layout of the published ablation tables.

    One block per layer family (RNN/BiRNN, GRU/BiGRU, LSTM/BiLSTM); rows
    are word embedding x network embedding; metric columns repeat for the
    unidirectional and bidirectional layer.
    """
    index = {}
    for r in rows:
        d = r.details
        index[(d["we_model"], d["ne_model"], d["recurrent"], d["bidirection"])] = r
    we_models = list(dict.fromkeys(r.details["we_model"] for r in rows))
    ne_models = [m.value for m in NODE_MODELS if any(r.details["ne_model"] == m.value for r in rows)]
    header_metrics = ["Accuracy", "Precision", "Recall", "F1-Score"]
    out = []
    for kind in RECURRENT_KINDS:
        if not any(r.details["recurrent"] == kind.value for r in rows):
            continue
        uni, bi = f"{kind.value} Layer", f"Bi{kind.value} Layer"
        out.append("| Word Embedding | Network Embedding | Text Branch | Propagation Branch | "
                   + " | ".join(f"{uni} {m}" for m in header_metrics) + " | "
                   + " | ".join(f"{bi} {m}" for m in header_metrics) + " |")
        out.append("|" + "---|" * 12)
        for we in we_models:
            for ne in ne_models:
                cells = [_cell(index.get((we, ne, kind.value, False)), m) for m in METRICS]
                cells += [_cell(index.get((we, ne, kind.value, True)), m) for m in METRICS]
                net = "N/A" if ne == NodeModel.NONE.value else ne
                prop = "N/A" if ne == NodeModel.NONE.value else "✓"
                out.append(f"| {we} | {net} | ✓ | {prop} | " + " | ".join(cells) + " |")
        out.append("")
    return "\n".join(out)


def format_tuning_table(rows: Sequence[SummaryRow]) -> str:
    """Node2Vec rows as p | q | d, DeepWalk rows as d | RNN Layer; metric order as published."""
    order = ("accuracy", "recall", "precision", "f1")
    names = "Accuracy | Recall | Precision | F1-Score"
    if rows and "p" in rows[0].details:
        out = [f"| p | q | d | {names} |", "|" + "---|" * 7]
        for r in rows:
            d = r.details
            out.append(f"| {d['p']} | {d['q']} | {d['d']} | " + " | ".join(_cell(r, m) for m in order) + " |")
    else:
        out = [f"| d | RNN Layer | {names} |", "|" + "---|" * 6]
        for r in rows:
            d = r.details
            layer = ("Bi" if d["bidirection"] else "") + d["recurrent"]
            out.append(f"| {d['d']} | {layer} | " + " | ".join(_cell(r, m) for m in order) + " |")
    return "\n".join(out) + "\n"
