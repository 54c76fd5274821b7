"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line through the ``acceptance`` fixture
before asserting, so the summary at the end of the run lists every
criterion even when one fails.
"""

import json
import time

import networkx as nx
import numpy as np

from getae.cli import main
from getae.evaluation import NODE2VEC_PQ, compute_metrics, node2vec_tuning_cells, stratified_kfold
from getae.graph import parse_tree_file, serialize_tree
from getae.model import GetaeConfig, NodeModel, assemble, load_model, save_model, train
from getae.nn import Activation, binary_cross_entropy, binary_cross_entropy_grad
from getae.sgns import EmbeddingMatrix, SgnsConfig, cosine_similarity, read_embeddings, train_sgns, write_embeddings
from getae.walks import WalkConfig, WalkGraph, WalkMode, _Sampler, transition_distribution
from factories import small_config, toy_problem
from oracles import brute_metrics, brute_transition, numeric_grad, rel_error, two_community_corpus
from test_cli import TINY_INI
from test_graph import random_tree_text
from test_nn import RECURRENT_VARIANTS, dense_grad_errors, recurrent_grad_errors


def test_1_gradient_suite(acceptance):
    start = time.perf_counter()
    layer_errors = {f"dense/{a.value}": dense_grad_errors(a) for a in Activation}
    for kind, bi in RECURRENT_VARIANTS:
        layer_errors[f"{'Bi' if bi else ''}{kind.value}"] = recurrent_grad_errors(kind, bi)
    rng = np.random.default_rng(0)
    pred = rng.uniform(0.05, 0.95, size=7)
    label = rng.integers(0, 2, size=7).astype(float)
    layer_errors["bce"] = rel_error(
        binary_cross_entropy_grad(pred, label),
        numeric_grad(lambda: float(binary_cross_entropy(pred, label).sum()), pred),
    )

    W, nodes, samples = toy_problem()
    batch = samples[:6]
    model_errors = {}
    for kind, bi in RECURRENT_VARIANTS:
        for ne in (NodeModel.NONE, NodeModel.NODE2VEC):
            cfg = small_config(kind, bi, ne_model=ne)
            model = assemble(cfg, W, nodes if cfg.propagation else None, seq_len=6)

            def loss():
                return model.loss_and_grads(batch, training=True, rng=np.random.default_rng(9))[0]

            _, grads = model.loss_and_grads(batch, training=True, rng=np.random.default_rng(9))
            model_errors[cfg.label()] = max(rel_error(grads[k], numeric_grad(loss, v))
                                            for k, v in model.params.items())
    elapsed = time.perf_counter() - start
    worst_layer = max(layer_errors.values())
    worst_model = max(model_errors.values())
    ok = worst_layer < 1e-4 and worst_model < 1e-3 and len(model_errors) == 12 and elapsed < 120
    acceptance(1, ok, f"layer max rel err {worst_layer:.2e} ({len(layer_errors)} checks), "
                      f"model max {worst_model:.2e} ({len(model_errors)} assemblies), {elapsed:.1f}s")
    assert ok


def test_2_walk_distribution_oracle(acceptance):
    rng = np.random.default_rng(2024)
    worst = 0.0
    checked = 0
    uniform_exact = True
    for g_idx in range(100):
        directed = bool(g_idx % 2)
        nxg = nx.gnp_random_graph(20, 0.2, seed=int(rng.integers(2**31)), directed=directed)
        g = WalkGraph(nxg.edges(), list(nxg.nodes()), directed=directed)
        p, q = rng.choice([0.25, 0.5, 1.0, 2.0, 4.0], size=2)
        for prev, cur in nxg.edges():
            if g.neighbors(cur).size == 0:
                continue
            nbrs, probs = transition_distribution(prev, cur, g, p, q)
            ref = brute_transition(nxg, prev, cur, p, q)
            if set(nbrs.tolist()) != set(ref):
                worst = float("inf")
                continue
            worst = max(worst, max(abs(pr - ref[x]) for x, pr in zip(nbrs.tolist(), probs)))
            checked += 1
            _, flat = transition_distribution(prev, cur, g, 1.0, 1.0)
            uniform_exact &= bool(np.array_equal(flat, np.full(nbrs.size, 1.0 / nbrs.size)))

    # empirical frequencies from the alias sampler
    nxg = nx.gnp_random_graph(20, 0.3, seed=5, directed=True)
    g = WalkGraph(nxg.edges(), list(nxg.nodes()))
    sampler = _Sampler(g, WalkConfig(p=0.5, q=2.0, mode=WalkMode.SECOND_ORDER))
    prev, cur = max(nxg.edges(), key=lambda e: g.neighbors(e[1]).size)
    nbrs, probs = transition_distribution(prev, cur, g, 0.5, 2.0)
    n = 10**5
    draws = np.random.default_rng(6)
    counts = np.bincount([sampler.step(prev, cur, draws) for _ in range(n)], minlength=len(g))
    empirical_gap = float(np.abs(counts[nbrs] / n - probs).max())

    ok = worst <= 1e-12 and empirical_gap < 0.02 and uniform_exact and checked > 0
    acceptance(2, ok, f"{checked} transitions, max |diff| {worst:.1e}; empirical gap {empirical_gap:.4f} "
                      f"over {n} draws; p=q=1 uniform exact: {uniform_exact}")
    assert ok


def test_3_sgns_two_communities(acceptance):
    start = time.perf_counter()
    corpus = two_community_corpus(np.random.default_rng(0))
    matrix = train_sgns(corpus, SgnsConfig(seed=0), num_items=100)
    vecs = matrix.input_vectors
    intra, inter = [], []
    for a in range(1, 101):
        for b in range(a + 1, 101):
            same = (a <= 50) == (b <= 50)
            (intra if same else inter).append(cosine_similarity(vecs[a], vecs[b]))
    margin = float(np.mean(intra) - np.mean(inter))
    losses = matrix.epoch_losses
    monotone = all(b < a for a, b in zip(losses, losses[1:]))
    elapsed = time.perf_counter() - start
    ok = margin >= 0.2 and monotone and len(losses) == 5 and elapsed < 60
    acceptance(3, ok, f"intra-inter cosine margin {margin:.3f}; losses "
                      f"{[round(x, 4) for x in losses]}; {elapsed:.1f}s")
    assert ok


def test_4_end_to_end_overfit(acceptance):
    W, nodes, samples = toy_problem(n=32)
    results = {}
    for kind, bi in RECURRENT_VARIANTS:
        for ne in (NodeModel.NONE, NodeModel.NODE2VEC):
            cfg = GetaeConfig(bidirection=bi, recurrent=kind, ne_model=ne, node_dim=None, seed=0)
            model = assemble(cfg, W, nodes if cfg.propagation else None, seq_len=6)
            start = time.perf_counter()
            report = train(model, samples, epochs=200, target_accuracy=1.0)
            results[cfg.label()] = (report.epoch_accuracies[-1], report.epochs_run, time.perf_counter() - start)
    ok = len(results) == 12 and all(acc == 1.0 and ep <= 200 and t < 120 for acc, ep, t in results.values())
    slowest = max(t for _, _, t in results.values())
    most_epochs = max(ep for _, ep, _ in results.values())
    acceptance(4, ok, f"{sum(acc == 1.0 for acc, _, _ in results.values())}/12 configs at accuracy 1.0, "
                      f"max {most_epochs} epochs, slowest {slowest:.2f}s")
    assert ok


def test_5_metrics_oracle(acceptance):
    rng = np.random.default_rng(5)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        pred, true = rng.integers(0, 2, n), rng.integers(0, 2, n)
        mismatches += compute_metrics(pred, true).as_dict() != brute_metrics(pred, true)
    acceptance(5, mismatches == 0, f"{mismatches} mismatches over 1000 random vectors (exact equality)")
    assert mismatches == 0


def _write_ini(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY_INI, encoding="utf-8")
    return path


def test_6_protocol_structure(acceptance, synthetic_root, tmp_path):
    ini = _write_ini(tmp_path)
    rc_ablate = main(["ablate", str(synthetic_root), "--config", str(ini), "--out", str(tmp_path / "a")])
    rc_tune = main(["tune", str(synthetic_root), "--grid", "node2vec", "--config", str(ini), "--out", str(tmp_path / "t")])
    ablation = json.loads((tmp_path / "a" / "ablation.json").read_text(encoding="utf-8"))
    tuning = json.loads((tmp_path / "t" / "tune_node2vec.json").read_text(encoding="utf-8"))
    cells = node2vec_tuning_cells(GetaeConfig())
    pqd = {(c.node_params.p, c.node_params.q, c.node_params.dim) for c in cells}
    expected = {(float(p), float(q), d) for p, q in NODE2VEC_PQ for d in (32, 100)}

    rng = np.random.default_rng(6)
    ratio_ok = True
    for _ in range(200):
        labels = rng.integers(0, 2, size=int(rng.integers(40, 200)))
        k = int(rng.integers(2, 11))
        if min(np.sum(labels == 0), np.sum(labels == 1)) < k:
            continue
        split = stratified_kfold(labels, k, int(rng.integers(2**31)))
        for c in (0, 1):
            share = np.sum(labels == c) / k
            ratio_ok &= all(abs(np.sum(labels[f] == c) - share) <= 1 for f in split.folds)

    ok = (rc_ablate == 0 and rc_tune == 0 and len(ablation) == 54 and len(tuning) == 12
          and len(cells) == 12 and pqd == expected and ratio_ok)
    acceptance(6, ok, f"ablation rows {len(ablation)}, node2vec tuning rows {len(tuning)}, "
                      f"(p,q,d) set matches: {pqd == expected}, fold +-1 bound: {ratio_ok}")
    assert ok


def test_7_ablate_is_deterministic(acceptance, synthetic_root, tmp_path):
    ini = _write_ini(tmp_path)
    for run in ("first", "second"):
        assert main(["ablate", str(synthetic_root), "--config", str(ini), "--seed", "13",
                     "--out", str(tmp_path / run)]) == 0
    names = ["ablation.csv", "ablation.json", "ablation_table.md"]
    same = {n: (tmp_path / "first" / n).read_bytes() == (tmp_path / "second" / n).read_bytes() for n in names}
    ok = all(same.values())
    acceptance(7, ok, "byte-identical: " + ", ".join(f"{n}={v}" for n, v in same.items()))
    assert ok


def test_8_format_round_trips(acceptance, tmp_path):
    rng = np.random.default_rng(8)
    trees_ok = True
    for t in range(50):
        text, _ = random_tree_text(rng, int(rng.integers(2, 40)), str(7000 + t))
        tree = parse_tree_file(text)
        trees_ok &= serialize_tree(tree) == text and parse_tree_file(serialize_tree(tree)).edges == tree.edges

    vecs = rng.normal(size=(6, 5)) * 10.0 ** rng.integers(-8, 8, size=(6, 5))
    vecs[0] = 0.0
    matrix = EmbeddingMatrix(vecs, np.zeros_like(vecs), ["a", "bx", "123", "é", "z"])
    write_embeddings(tmp_path / "e.emb", matrix)
    back = read_embeddings(tmp_path / "e.emb")
    emb_ok = back.item_keys() == matrix.item_keys() and back.input_vectors.tobytes() == vecs.tobytes()

    W, nodes, samples = toy_problem()
    ckpt_ok = True
    for kind, bi in RECURRENT_VARIANTS:
        model = assemble(small_config(kind, bi), W, nodes, seq_len=6)
        train(model, samples, epochs=2)
        path = tmp_path / f"{kind.value}{bi}.ckpt"
        save_model(model, path)
        loaded = load_model(path, expected=model.config)
        ckpt_ok &= loaded.predict_proba(samples).tobytes() == model.predict_proba(samples).tobytes()

    ok = trees_ok and emb_ok and ckpt_ok
    acceptance(8, ok, f"tree parse/serialize: {trees_ok}; embedding write/read: {emb_ok}; "
                      f"checkpoint predictions bit-identical (6 variants): {ckpt_ok}")
    assert ok
