import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from getae.dataset import load_dataset
from getae.evaluation import (
    NODE2VEC_PQ,
    AblationGrid,
    EvalProtocol,
    MetricsReport,
    aggregate,
    compute_metrics,
    deepwalk_tuning_cells,
    format_ablation_table,
    format_tuning_table,
    holdout_split,
    node2vec_tuning_cells,
    rows_to_csv,
    run_cells,
    stratified_kfold,
)
from getae.model import GetaeConfig, NodeModel
from getae.nn import RecurrentKind
from getae.pipeline import EmbeddingStore, NodeEmbeddingParams, Word2VecParams, derive_seed
from oracles import brute_metrics


# -- folds -------------------------------------------------------------------

def test_balanced_folds_exact():
    labels = np.array([1] * 10 + [0] * 10)
    split = stratified_kfold(labels, k=10, seed=0)
    for fold in split.folds:
        assert sorted(labels[fold].tolist()) == [0, 1]


@given(st.lists(st.integers(0, 1), min_size=20, max_size=120), st.integers(2, 10), st.integers(0, 2**32))
def test_folds_disjoint_exhaustive_and_stratified(labels, k, seed):
    labels = np.array(labels)
    if min(np.sum(labels == 0), np.sum(labels == 1)) < k:
        return
    split = stratified_kfold(labels, k, seed)
    everything = np.concatenate(split.folds)
    assert sorted(everything.tolist()) == list(range(labels.size))
    for c in (0, 1):
        total = np.sum(labels == c)
        for fold in split.folds:
            assert abs(np.sum(labels[fold] == c) - total / k) <= 1
    train, test = split.train_test(0)
    assert not set(train) & set(test) and len(train) + len(test) == labels.size


def test_same_seed_same_split():
    labels = np.random.default_rng(0).integers(0, 2, size=50)
    a, b = stratified_kfold(labels, 5, 3), stratified_kfold(labels, 5, 3)
    assert all(np.array_equal(x, y) for x, y in zip(a.folds, b.folds))


def test_holdout_is_eighty_twenty():
    labels = np.array([1] * 50 + [0] * 50)
    split = holdout_split(labels, 0.2, seed=1)
    train, test = split.train_test(0)
    assert len(test) == 20 and labels[test].sum() == 10 and split.protocol == "holdout"


def test_fold_errors():
    with pytest.raises(ValueError):
        stratified_kfold([0, 1] * 3, k=5)
    with pytest.raises(ValueError):
        stratified_kfold([0, 1], k=1)


# -- metrics -----------------------------------------------------------------

def test_perfect_predictions():
    m = compute_metrics([1, 0, 1], [1, 0, 1])
    assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)


def test_hand_computed_confusion():
    m = compute_metrics([1, 1, 0, 0], [1, 0, 1, 0])
    assert (m.accuracy, m.precision, m.recall, m.f1) == (0.5, 0.5, 0.5, 0.5)


def test_all_positive_predictions():
    m = compute_metrics([1, 1, 1, 1], [1, 0, 1, 0])
    assert m.accuracy == 0.5 and m.recall == 0.5
    assert m.precision == 0.25  # class 0 precision is 0/0 -> 0


def test_metrics_equal_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 40))
        pred, true = rng.integers(0, 2, n), rng.integers(0, 2, n)
        assert compute_metrics(pred, true).as_dict() == brute_metrics(pred, true)


def test_metrics_input_validation():
    with pytest.raises(ValueError):
        compute_metrics([1, 0], [1])
    with pytest.raises(ValueError):
        compute_metrics([], [])
    with pytest.raises(ValueError):
        compute_metrics([2], [1])


def _report(v):
    return MetricsReport(v, v, v, v, 0, 0, 0, 0)


def test_aggregate_mean_and_sample_std():
    row = aggregate([_report(0.8), _report(0.9)])
    assert math.isclose(row.mean["accuracy"], 0.85)
    assert math.isclose(row.std["accuracy"], 0.0707106781, rel_tol=1e-9)
    assert aggregate([_report(0.7)] * 3).std["f1"] == 0.0
    assert aggregate([_report(0.7)]).std["f1"] == 0.0


@given(st.lists(st.floats(0, 1), min_size=2, max_size=12), st.randoms(use_true_random=False))
def test_aggregate_is_order_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a = aggregate([_report(v) for v in values])
    b = aggregate([_report(v) for v in shuffled])
    assert a.mean == b.mean and a.std == b.std


# -- grids -------------------------------------------------------------------

def test_full_ablation_grid_size():
    cells = AblationGrid().cells(GetaeConfig())
    assert len(cells) == len(AblationGrid()) == 54
    assert len({c.label for c in cells}) == 54


def test_node2vec_tuning_cells_match_published_rows():
    cells = node2vec_tuning_cells(GetaeConfig())
    got = {(c.node_params.p, c.node_params.q, c.node_params.dim) for c in cells}
    assert got == {(p, q, d) for p, q in NODE2VEC_PQ for d in (32, 100)} and len(cells) == 12
    assert NODE2VEC_PQ == ((1, 1), (1, 0.5), (0.5, 1), (0.5, 0.5), (2, 1), (1, 2))


def test_deepwalk_tuning_cells():
    cells = deepwalk_tuning_cells(GetaeConfig())
    assert len(cells) == 12
    assert {(c.node_params.dim, c.config.recurrent, c.config.bidirection) for c in cells} == {
        (d, k, b) for d in (32, 100) for k in RecurrentKind for b in (False, True)
    }
    assert all(c.node_params.window == 5 for c in cells)


# -- harness on the synthetic dataset ----------------------------------------

def _tiny_store(root, seed=0):
    dataset, _ = load_dataset(root)
    return EmbeddingStore(dataset, Word2VecParams(dim=6, min_count=1, epochs=1), seed=seed)


def _tiny_nodes():
    return {
        NodeModel.NODE2VEC: NodeEmbeddingParams(NodeModel.NODE2VEC, dim=6, walks_per_node=2),
        NodeModel.DEEPWALK: NodeEmbeddingParams(NodeModel.DEEPWALK, dim=6, window=5, walks_per_node=2),
    }


TINY = GetaeConfig(hidden_units=4, graph_dense=3, text_dense=3, epochs=2)


def test_subgrid_rows_have_one_entry_per_fold(synthetic_root):
    grid = AblationGrid(we_models=("Word2Vec", "BERT"), ne_models=(NodeModel.NONE, NodeModel.NODE2VEC),
                        recurrents=(RecurrentKind.GRU,), bidirections=(False,))
    rows = run_cells(_tiny_store(synthetic_root), grid.cells(TINY, _tiny_nodes()), EvalProtocol(k=5), seed=1)
    assert len(rows) == 4
    for r in rows:
        assert all(len(v) == 5 for v in r.fold_values.values())
        assert r.protocol == "kfold"
    csv_lines = rows_to_csv(rows).splitlines()
    assert csv_lines[0] == "config,metric,mean,std,fold_1,fold_2,fold_3,fold_4,fold_5"
    assert len(csv_lines) == 1 + 4 * 4


def test_ablation_consistent_across_workers(synthetic_root):
    grid = AblationGrid(we_models=("BERT",), ne_models=(NodeModel.DEEPWALK,), recurrents=(RecurrentKind.RNN,))
    cells = grid.cells(TINY, _tiny_nodes())
    serial = run_cells(_tiny_store(synthetic_root), cells, EvalProtocol(k=3), seed=2, workers=1)
    parallel = run_cells(_tiny_store(synthetic_root), cells, EvalProtocol(k=3), seed=2, workers=2)
    assert [r.as_dict() for r in serial] == [r.as_dict() for r in parallel]


def test_holdout_protocol_rows(synthetic_root):
    cells = node2vec_tuning_cells(TINY, _tiny_nodes())[:2]
    rows = run_cells(_tiny_store(synthetic_root), cells, EvalProtocol("holdout"), seed=0)
    assert all(r.protocol == "holdout" and len(r.fold_values["f1"]) == 1 for r in rows)
    table = format_tuning_table(rows)
    assert table.splitlines()[0] == "| p | q | d | Accuracy | Recall | Precision | F1-Score |"


def test_ablation_table_layout(synthetic_root):
    grid = AblationGrid(we_models=("BERT",), recurrents=(RecurrentKind.LSTM,))
    rows = run_cells(_tiny_store(synthetic_root), grid.cells(TINY, _tiny_nodes()), EvalProtocol(k=2), seed=0)
    lines = format_ablation_table(rows).splitlines()
    assert lines[0].startswith("| Word Embedding | Network Embedding | Text Branch | Propagation Branch | LSTM Layer Accuracy")
    assert "BiLSTM Layer F1-Score" in lines[0]
    body = lines[2:5]
    assert [ln.split(" | ")[1] for ln in body] == ["N/A", "Node2Vec", "DeepWalk"]
    json.dumps([r.as_dict() for r in rows])


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(0, "a") == derive_seed(0, "a")
    assert len({derive_seed(0, "a"), derive_seed(0, "b"), derive_seed(1, "a")}) == 3
    assert 0 <= derive_seed(123, "x", 4) < 2**63
