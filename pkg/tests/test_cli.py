import csv
import hashlib
import json

import pytest

from getae.cli import build_parser, main
from getae.graph import validate_dot

TINY_INI = """\
[word2vec]
dim = 6
min_count = 1
epochs = 1
[node2vec]
dim = 6
walks_per_node = 2
[deepwalk]
dim = 6
walks_per_node = 2
[model]
hidden_units = 4
graph_dense = 3
text_dense = 3
epochs = 2
[eval]
k = 3
"""


@pytest.fixture
def tiny_ini(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY_INI, encoding="utf-8")
    return str(path)


def _run(*args):
    return main([str(a) for a in args])


def _csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def test_help_lists_published_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for needle in ["[word2vec]", "min_count = 4   (published: 4)", "[deepwalk]", "window = 5   (published: 5)",
                   "walk_length = 10   (published: 10)", "learning_rate = 0.05   (published: 0.05)",
                   "dropout = 0.2   (published: 0.2)", "graph_dense = 32   (published: 32)", "max_length = 128"]:
        assert needle in out


def test_ingest(synthetic_root, tmp_path):
    assert _run("ingest", synthetic_root, "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "ingest_summary.json").read_text(encoding="utf-8"))
    assert summary["documents"] == 20 and summary["class_counts"] == {"false": 10, "true": 10}


def test_exit_codes(synthetic_root, tmp_path, tiny_ini):
    assert _run("ingest", tmp_path / "missing", "--out", tmp_path) == 1
    assert _run("evaluate", synthetic_root, "--we", "NoSuchModel", "--config", tiny_ini, "--out", tmp_path) == 1
    assert _run("train", synthetic_root, "--set", "model.nope=1", "--out", tmp_path) == 1
    assert _run("ingest", synthetic_root, "--config", tmp_path / "absent.ini", "--out", tmp_path) == 1
    with pytest.raises(SystemExit) as exc:
        main(["embed", str(synthetic_root), "--kind", "glove"])
    assert exc.value.code == 2  # argparse usage error


def test_runtime_failure_exit_code(synthetic_root, tmp_path, monkeypatch):
    import getae.cli as cli

    def boom(*_):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "tree_statistics", boom)
    assert _run("analyze-graph", synthetic_root, "--out", tmp_path) == 2


@pytest.mark.parametrize("kind", ["word2vec", "node2vec", "deepwalk"])
def test_embed_is_deterministic(synthetic_root, tmp_path, tiny_ini, kind):
    digests = []
    for run in ("a", "b"):
        assert _run("embed", synthetic_root, "--kind", kind, "--config", tiny_ini, "--out", tmp_path / run) == 0
        digests.append(hashlib.sha256((tmp_path / run / f"{kind}.emb").read_bytes()).hexdigest())
    assert digests[0] == digests[1]
    assert (tmp_path / "a" / f"{kind}.emb").read_text(encoding="utf-8").startswith("items=")


def test_embed_seed_changes_output(synthetic_root, tmp_path, tiny_ini):
    _run("embed", synthetic_root, "--kind", "node2vec", "--config", tiny_ini, "--out", tmp_path / "a")
    _run("embed", synthetic_root, "--kind", "node2vec", "--config", tiny_ini, "--out", tmp_path / "b", "--seed", 5)
    assert (tmp_path / "a" / "node2vec.emb").read_bytes() != (tmp_path / "b" / "node2vec.emb").read_bytes()


def test_analyze_graph(synthetic_root, tmp_path):
    assert _run("analyze-graph", synthetic_root, "--out", tmp_path) == 0
    rows = _csv(tmp_path / "graph_stats.csv")
    assert rows[0] == ["stat", "id", "value"]
    assert {r[0] for r in rows[1:]} >= {"nodes", "edges", "average_degree", "mean_degree_centrality"}


def test_train_without_propagation(synthetic_root, tmp_path, tiny_ini):
    assert _run("train", synthetic_root, "--no-propagation", "--config", tiny_ini, "--out", tmp_path) == 0
    report = json.loads((tmp_path / "train_report.json").read_text(encoding="utf-8"))
    assert report["config"]["ne_model"] == "None" and report["label"] == "Word2Vec|None|RNN"
    sidecar = json.loads((tmp_path / "model.ckpt.json").read_text(encoding="utf-8"))
    assert sidecar["config"]["ne_model"] == "None"


def test_evaluate_and_export(synthetic_root, tmp_path, tiny_ini):
    assert _run("evaluate", synthetic_root, "--we", "BERT", "--recurrent", "LSTM", "--bidirectional",
                "--config", tiny_ini, "--out", tmp_path) == 0
    rows = _csv(tmp_path / "evaluation.csv")
    assert rows[0][:4] == ["config", "metric", "mean", "std"] and len(rows[0]) == 4 + 3
    assert rows[1][0] == "BERT|Node2Vec|BiLSTM"
    assert _run("export-plots", "--reports", tmp_path / "evaluation.json", "--out", tmp_path / "plots") == 0
    assert len(_csv(tmp_path / "plots" / "evaluation_metrics.csv")) == 1 + 4


def test_holdout_protocol_flag(synthetic_root, tmp_path, tiny_ini):
    assert _run("evaluate", synthetic_root, "--protocol", "holdout", "--config", tiny_ini, "--out", tmp_path) == 0
    assert json.loads((tmp_path / "evaluation.json").read_text(encoding="utf-8"))[0]["protocol"] == "holdout"


def test_export_plots_dataset(synthetic_root, tmp_path):
    assert _run("export-plots", synthetic_root, "--out", tmp_path, "--bins", 7, "--max-trees", 3) == 0
    for name in ["char_length_hist.csv", "word_count_hist.csv", "average_degree_hist.csv",
                 "degree_centrality_hist.csv"]:
        rows = _csv(tmp_path / name)
        assert rows[0] == ["bin_low", "bin_high", "count", "log_scale"] and len(rows) - 1 == 7
    assert _csv(tmp_path / "class_distribution.csv")[1:] == [["false", "10"], ["true", "10"]]
    dots = sorted((tmp_path / "trees").glob("*.dot"))
    assert len(dots) == 3 and all(validate_dot(p.read_text(encoding="utf-8")) for p in dots)


def test_star_trees_give_a_single_degree_spike(tmp_path):
    root = tmp_path / "stars"
    (root / "tree").mkdir(parents=True)
    src, lab = [], []
    for t in range(6):
        tid = str(500 + t)
        src.append(f"{tid}\tstar number {t}")
        lab.append(f"{'true' if t % 2 else 'false'}:{tid}")
        lines = [f"['ROOT', 'ROOT', '0.0']->['c{t}', '{tid}', '0.0']"]
        lines += [f"['c{t}', '{tid}', '0.0']->['l{t}_{j}', '{tid}{j}', '{j}.0']" for j in range(4)]
        (root / "tree" / f"{tid}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (root / "source_tweets.txt").write_text("\n".join(src) + "\n", encoding="utf-8")
    (root / "label.txt").write_text("\n".join(lab) + "\n", encoding="utf-8")
    assert _run("export-plots", root, "--out", tmp_path / "out", "--bins", 5) == 0
    counts = [int(r[2]) for r in _csv(tmp_path / "out" / "average_degree_hist.csv")[1:]]
    assert sorted(counts) == [0, 0, 0, 0, 6]


def test_ablate_and_tune_row_counts(synthetic_root, tmp_path, tiny_ini):
    assert _run("ablate", synthetic_root, "--config", tiny_ini, "--out", tmp_path) == 0
    data = json.loads((tmp_path / "ablation.json").read_text(encoding="utf-8"))
    assert len(data) == 54
    assert (tmp_path / "ablation_table.md").read_text(encoding="utf-8").count("| Word2Vec |") == 9
    for grid in ("node2vec", "deepwalk"):
        assert _run("tune", synthetic_root, "--grid", grid, "--config", tiny_ini, "--out", tmp_path) == 0
        assert len(json.loads((tmp_path / f"tune_{grid}.json").read_text(encoding="utf-8"))) == 12


def test_synth_command(tmp_path):
    assert _run("synth", tmp_path / "s", "--per-class", 4) == 0
    assert len((tmp_path / "s" / "label.txt").read_text(encoding="utf-8").splitlines()) == 8
