"""``getae`` command-line entry point.

Every command reads a dataset directory, applies the run configuration
(built-in defaults, then ``--config`` INI file, then flags) and writes its
results under ``--out``. Logs go to stderr; exit status is 0 on success,
1 on invalid input or configuration and 2 on any other failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, describe_defaults, load_config
from .dataset import DatasetError, load_dataset, make_synthetic_dataset
from .evaluation import (
    AblationGrid,
    GridCell,
    deepwalk_tuning_cells,
    format_ablation_table,
    format_tuning_table,
    node2vec_tuning_cells,
    run_cells,
    write_results,
    compute_metrics,
    holdout_split,
)
from .graph import histogram, tree_statistics, tree_to_dot, average_degree, degree_centrality
from .model import ConfigMismatchError, NodeModel, assemble, predict, save_model, train
from .nn.layers import RecurrentKind
from .pipeline import EmbeddingStore, MissingArtifactError, derive_seed, node_params_for, train_word2vec, train_node_embeddings
from .sgns import EmbeddingMatrix, write_embeddings
from .text import EmptyVocabularyError, SequenceFileError

logger = logging.getLogger("getae")

VALIDATION_ERRORS = (ConfigError, DatasetError, FileNotFoundError, MissingArtifactError,
                     ConfigMismatchError, EmptyVocabularyError, SequenceFileError, ValueError, LookupError)


# -- helpers ----------------------------------------------------------------

def _resolve(args) -> RunConfig:
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"run.seed={args.seed}")
    if getattr(args, "workers", None) is not None:
        overrides.append(f"run.workers={args.workers}")
    for attr, key in (("we", "model.we_model"), ("ne", "model.ne_model"), ("recurrent", "model.recurrent"),
                      ("epochs", "model.epochs"), ("protocol", "eval.kind"), ("k", "eval.k")):
        value = getattr(args, attr, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    if getattr(args, "bidirectional", False):
        overrides.append("model.bidirection=true")
    if getattr(args, "no_propagation", False):
        overrides.append("model.ne_model=None")
    cfg = load_config(args.config, overrides)
    return replace(cfg, model=replace(cfg.model, seed=derive_seed(cfg.run.seed, "model")))


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.run.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _store(dataset, cfg: RunConfig) -> EmbeddingStore:
    return EmbeddingStore(dataset, cfg.word2vec, cfg.sequences, seed=cfg.run.seed)


def _cell_for(cfg: RunConfig) -> GridCell:
    model = cfg.model
    node_params = node_params_for(model.ne_model, cfg.node_defaults())
    if node_params is not None:
        model = replace(model, node_dim=node_params.dim)
    return GridCell(model, node_params, ())


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def _histogram_csv(values, bins: int, log_scale: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_low", "bin_high", "count", "log_scale"])
    for b in histogram(values, bins, log_scale):
        w.writerow([repr(b.low), repr(b.high), b.count, int(log_scale)])
    return buf.getvalue()


# -- commands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    root = make_synthetic_dataset(args.dataset, n_per_class=args.per_class, seed=args.seed or 0)
    logger.info("synthetic dataset written to %s", root)
    return 0


def cmd_ingest(args) -> int:
    cfg = _resolve(args)
    dataset, report = load_dataset(args.dataset)
    summary = report.summary()
    out = _out_dir(args, cfg)
    _write_text(out / "ingest_summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    logger.info("%d documents retained: %s", summary["documents"], summary["class_counts"])
    return 0


def cmd_embed(args) -> int:
    cfg = _resolve(args)
    dataset, _ = load_dataset(args.dataset)
    out = _out_dir(args, cfg)
    if args.kind == "word2vec":
        matrix: EmbeddingMatrix = train_word2vec(dataset, cfg.word2vec, derive_seed(cfg.run.seed, "word2vec")).matrix
    else:
        kind = NodeModel.NODE2VEC if args.kind == "node2vec" else NodeModel.DEEPWALK
        params = node_params_for(kind, cfg.node_defaults())
        matrix = train_node_embeddings(dataset, params, derive_seed(cfg.run.seed, "nodes", kind.value))
    for epoch, loss in enumerate(matrix.epoch_losses, start=1):
        logger.info("%s epoch %d mean loss %.6f", args.kind, epoch, loss)
    path = out / f"{args.kind}.emb"
    write_embeddings(path, matrix)
    logger.info("wrote %s (%d items, dim %d)", path, matrix.num_items, matrix.dim)
    return 0


def cmd_analyze_graph(args) -> int:
    cfg = _resolve(args)
    dataset, _ = load_dataset(args.dataset)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["stat", "id", "value"])
    for stat, tid, value in tree_statistics(dataset.corpus.trees):
        w.writerow([stat, tid, repr(value)])
    _write_text(_out_dir(args, cfg) / "graph_stats.csv", buf.getvalue())
    return 0


def cmd_train(args) -> int:
    cfg = _resolve(args)
    dataset, _ = load_dataset(args.dataset)
    out = _out_dir(args, cfg)
    store = _store(dataset, cfg)
    cell = _cell_for(cfg)
    samples = store.samples(cell.config.we_model, cell.node_params)
    text = store.text(cell.config.we_model)
    nodes = store.nodes(cell.node_params) if cell.node_params is not None else None
    split = holdout_split(dataset.labels(), cfg.eval.test_fraction, cfg.run.seed)
    train_idx, test_idx = split.train_test(0)
    model = assemble(cell.config, text.embeddings, nodes, seq_len=text.seq_len)
    report = train(model, [samples[i] for i in train_idx])
    for epoch, (loss, acc) in enumerate(zip(report.epoch_losses, report.epoch_accuracies), start=1):
        logger.info("epoch %d loss %.6f accuracy %.4f", epoch, loss, acc)
    test = [samples[i] for i in test_idx]
    pred, _ = predict(model, test)
    metrics = compute_metrics(pred, [s.label for s in test])
    save_model(model, out / "model.ckpt")
    summary = {
        "config": cell.config.to_dict(),
        "label": cell.config.label(),
        "protocol": "holdout",
        "epoch_losses": report.epoch_losses,
        "epoch_accuracies": report.epoch_accuracies,
        "test_metrics": metrics.as_dict(),
    }
    _write_text(out / "train_report.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve(args)
    dataset, _ = load_dataset(args.dataset)
    rows = run_cells(_store(dataset, cfg), [_cell_for(cfg)], cfg.eval, cfg.run.seed, cfg.run.workers)
    for path in write_results(rows, _out_dir(args, cfg), "evaluation"):
        logger.info("wrote %s", path)
    return 0


def cmd_ablate(args) -> int:
    cfg = _resolve(args)
    dataset, _ = load_dataset(args.dataset)
    grid = AblationGrid()
    cells = grid.cells(cfg.model, cfg.node_defaults())
    logger.info("ablation: %d cells x %s", len(cells), cfg.eval.kind)
    rows = run_cells(_store(dataset, cfg), cells, cfg.eval, cfg.run.seed, cfg.run.workers,
                     progress=lambda i, n: logger.debug("fold job %d/%d", i, n))
    out = _out_dir(args, cfg)
    for path in write_results(rows, out, "ablation"):
        logger.info("wrote %s", path)
    _write_text(out / "ablation_table.md", format_ablation_table(rows))
    return 0


def cmd_tune(args) -> int:
    cfg = _resolve(args)
    dataset, _ = load_dataset(args.dataset)
    if args.grid == "node2vec":
        cells = node2vec_tuning_cells(cfg.model, cfg.node_defaults())
    else:
        cells = deepwalk_tuning_cells(cfg.model, cfg.node_defaults())
    rows = run_cells(_store(dataset, cfg), cells, cfg.eval, cfg.run.seed, cfg.run.workers)
    out = _out_dir(args, cfg)
    stem = f"tune_{args.grid}"
    for path in write_results(rows, out, stem):
        logger.info("wrote %s", path)
    _write_text(out / f"{stem}_table.md", format_tuning_table(rows))
    return 0


def cmd_export_plots(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args, cfg)
    if args.reports:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["config", "metric", "mean", "std"])
        for row in json.loads(Path(args.reports).read_text(encoding="utf-8")):
            for metric, mean in row["mean"].items():
                w.writerow([row["config"], metric, repr(mean), repr(row["std"][metric])])
        _write_text(out / f"{Path(args.reports).stem}_metrics.csv", buf.getvalue())
    if args.dataset is None:
        return 0

    dataset, report = load_dataset(args.dataset)
    bins, log = args.bins, not args.linear
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "count"])
    for label, count in sorted(report.class_counts.items()):
        w.writerow([label, count])
    _write_text(out / "class_distribution.csv", buf.getvalue())
    if dataset.documents:
        _write_text(out / "char_length_hist.csv", _histogram_csv(report.char_lengths, bins, log))
        _write_text(out / "word_count_hist.csv", _histogram_csv(report.word_counts, bins, log))

    trees = dataset.corpus.trees
    if trees:
        ordered = [trees[t] for t in sorted(trees)]
        _write_text(out / "average_degree_hist.csv", _histogram_csv([average_degree(t) for t in ordered], bins, log))
        centrality = [v for t in ordered if len(t.users()) >= 2 for v in degree_centrality(t).values()]
        if centrality:
            _write_text(out / "degree_centrality_hist.csv", _histogram_csv(centrality, bins, log))
        wanted = args.tree or sorted(trees)[: args.max_trees]
        dot_dir = out / "trees"
        dot_dir.mkdir(exist_ok=True)
        for tid in wanted:
            if tid not in trees:
                raise LookupError(f"no propagation tree for id {tid}")
            _write_text(dot_dir / f"{tid}.dot", tree_to_dot(trees[tid]))
    return 0


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="getae",
        description="Fake news detection from post text and propagation graphs.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Defaults (override with --config FILE or --set section.key=value):\n" + describe_defaults(),
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one config value")
    common.add_argument("--seed", type=int, help="root seed (default 0)")
    common.add_argument("--out", help="output directory (default: [run] output)")
    common.add_argument("--workers", type=int, help="parallel fold jobs (default 1)")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--we", help="word embedding: Word2Vec or a pretrained sequence source such as BERT")
    model.add_argument("--ne", choices=[m.value for m in NodeModel], help="node embedding model")
    model.add_argument("--recurrent", choices=[k.value for k in RecurrentKind], help="recurrent cell kind")
    model.add_argument("--bidirectional", action="store_true", help="use a bidirectional recurrent layer")
    model.add_argument("--epochs", type=int, help="training epochs (default 8 for Word2Vec, else 30)")

    protocol = argparse.ArgumentParser(add_help=False)
    protocol.add_argument("--protocol", choices=["kfold", "holdout"], help="evaluation protocol")
    protocol.add_argument("--k", type=int, help="number of folds (default 10)")

    def add(name, func, helptext, parents=(common,), dataset=True):
        p = sub.add_parser(name, parents=list(parents), help=helptext, description=helptext)
        if dataset:
            p.add_argument("dataset", help="dataset directory")
        p.set_defaults(func=func)
        return p

    p = sub.add_parser("synth", help="write a small synthetic dataset", description="Write a small synthetic dataset.")
    p.add_argument("dataset", help="directory to create")
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    add("ingest", cmd_ingest, "validate a dataset and summarize it")
    p = add("embed", cmd_embed, "train word or node embeddings and write an embedding file")
    p.add_argument("--kind", required=True, choices=["word2vec", "node2vec", "deepwalk"])
    add("analyze-graph", cmd_analyze_graph, "per-tree graph statistics as CSV")
    p = add("train", cmd_train, "train one model on an 80-20 split and save a checkpoint", (common, model))
    p.add_argument("--no-propagation", action="store_true", help="text branch only (ne_model=None)")
    p = add("evaluate", cmd_evaluate, "cross-validate one model configuration", (common, model, protocol))
    p.add_argument("--no-propagation", action="store_true", help="text branch only (ne_model=None)")
    add("ablate", cmd_ablate, "run the 54-cell ablation grid", (common, protocol))
    p = add("tune", cmd_tune, "node embedding hyperparameter grid", (common, model, protocol))
    p.add_argument("--grid", required=True, choices=["node2vec", "deepwalk"])
    p = add("export-plots", cmd_export_plots, "histogram CSVs and DOT trees for figures", dataset=False)
    p.add_argument("dataset", nargs="?", help="dataset directory")
    p.add_argument("--reports", help="results JSON from evaluate/ablate/tune")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--linear", action="store_true", help="mark histograms for linear rather than log count axes")
    p.add_argument("--tree", action="append", help="tree id to export as DOT (repeatable)")
    p.add_argument("--max-trees", type=int, default=5, help="DOT trees to export when --tree is not given")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.command == "export-plots" and not (args.dataset or args.reports):
        parser.error("export-plots needs a dataset directory or --reports")
    try:
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        logger.error("%s", exc)
        return 1
    except Exception as exc:  # noqa: BLE001
        logger.exception("runtime failure: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
