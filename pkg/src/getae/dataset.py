"""Twitter15/16-style dataset directories and a synthetic generator.

Layout::

    source_tweets.txt   tweet_id<TAB>text
    label.txt           label:tweet_id
    tree/<tweet_id>.txt propagation edges
    sequences/<name>.txt  optional pretrained token vectors (see text.py)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import GraphCorpus, load_labels, load_trees
from .text import PretrainedSequenceSet, RawDocument, TextMode, preprocess_text, write_pretrained_sequences

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    pass


@dataclass
class IngestReport:
    documents: int
    class_counts: dict[str, int]
    dropped_labels: dict[str, int]
    orphan_trees: list[str]
    unparseable_trees: list[str]
    missing_trees: list[str]
    missing_text: list[str]
    char_lengths: list[int] = field(repr=False)
    word_counts: list[int] = field(repr=False)

    def summary(self) -> dict:
        return {
            "documents": self.documents,
            "class_counts": self.class_counts,
            "dropped_labels": self.dropped_labels,
            "orphan_trees": len(self.orphan_trees),
            "unparseable_trees": len(self.unparseable_trees),
            "missing_trees": len(self.missing_trees),
            "missing_text": len(self.missing_text),
            "mean_chars": float(np.mean(self.char_lengths)) if self.char_lengths else 0.0,
            "mean_words": float(np.mean(self.word_counts)) if self.word_counts else 0.0,
        }


@dataclass
class Dataset:
    documents: list[RawDocument]
    corpus: GraphCorpus
    root: Path | None = None

    def labels(self) -> np.ndarray:
        """Binary targets, 1 = fake (source labeled "false")."""
        return np.array([0 if d.label else 1 for d in self.documents], dtype=np.int64)

    def sequence_path(self, name: str) -> Path | None:
        if self.root is None:
            return None
        path = self.root / "sequences" / f"{name.lower()}.txt"
        return path if path.exists() else None


def _read_source_tweets(path: Path) -> dict[str, str]:
    texts = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        tid, sep, text = line.partition("\t")
        if not sep:
            raise DatasetError(f"{path}:{lineno}: expected tweet_id<TAB>text")
        texts[tid.strip()] = text
    return texts


def load_dataset(root: str | Path) -> tuple[Dataset, IngestReport]:
    root = Path(root)
    src, lab, tree_dir = root / "source_tweets.txt", root / "label.txt", root / "tree"
    for p in (src, lab):
        if not p.is_file():
            raise FileNotFoundError(f"missing dataset file: {p}")
    if not tree_dir.is_dir():
        raise FileNotFoundError(f"missing tree directory: {tree_dir}")

    texts = _read_source_tweets(src)
    labels, dropped = load_labels(lab.read_text(encoding="utf-8"))
    trees, bad = load_trees(tree_dir)
    orphans = sorted(t for t in trees if t not in labels)
    for t in orphans:
        del trees[t]
    if orphans:
        logger.warning("%d trees have no retained label and were skipped", len(orphans))

    docs, missing_trees, missing_text = [], [], []
    for tid in sorted(labels):
        if tid not in texts:
            missing_text.append(tid)
            continue
        tree = trees.get(tid)
        if tree is None:
            missing_trees.append(tid)
        docs.append(RawDocument(tid, texts[tid], tree.root_user if tree else "", labels[tid]))
    if missing_text:
        logger.warning("%d labeled ids have no source text", len(missing_text))
    if not docs:
        logger.warning("no documents retained (only true/false labels are kept)")

    counts = {"true": sum(d.label for d in docs), "false": sum(not d.label for d in docs)}
    report = IngestReport(
        documents=len(docs),
        class_counts=counts,
        dropped_labels=dropped,
        orphan_trees=orphans,
        unparseable_trees=bad,
        missing_trees=missing_trees,
        missing_text=missing_text,
        char_lengths=[len(d.text) for d in docs],
        word_counts=[len(d.text.split()) for d in docs],
    )
    corpus = GraphCorpus({d.id: trees[d.id] for d in docs if d.id in trees}, {d.id: d.label for d in docs})
    return Dataset(docs, corpus, root), report


# -- synthetic data ---------------------------------------------------------

_SHARED = "news report today people say video world city update story".split()
_FAKE = "shocking hoax secret exposed miracle banned conspiracy leaked unbelievable scandal".split()
_REAL = "official confirmed statement police announced according minister court council agency".split()
_FILLER = "the a of in on and this is to for".split()


def make_synthetic_dataset(
    root: str | Path,
    n_per_class: int = 20,
    seed: int = 0,
    users_per_community: int = 30,
    sequence_sources: tuple[str, ...] = ("BERT", "BERTweet"),
    sequence_dim: int = 16,
    extra_labels: dict[str, int] | None = None,
) -> Path:
    """Write a small separable dataset in the Twitter15/16 layout.

    Fake and true posts use disjoint cue words and are authored and spread
    by disjoint user communities, so both branches carry signal.
    ``extra_labels`` adds posts with other labels (e.g. ``{"unverified": 3}``).
    """
    root = Path(root)
    (root / "tree").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    communities = {
        True: [str(100000 + i) for i in range(users_per_community)],
        False: [str(200000 + i) for i in range(users_per_community)],
    }
    posts: list[tuple[str, str, str]] = []  # (tid, text, label)
    tid = 700000000
    plan = [(lbl, "true" if lbl else "false") for _ in range(n_per_class) for lbl in (True, False)]
    for extra, count in (extra_labels or {}).items():
        plan += [(None, extra)] * count
    for truth, label in plan:
        tid += 1
        cues = _REAL if truth or truth is None else _FAKE
        words = list(rng.choice(cues, size=4)) + list(rng.choice(_SHARED, size=3)) + list(rng.choice(_FILLER, size=3))
        rng.shuffle(words)
        text = " ".join(words)
        if rng.random() < 0.5:
            text += f" https://t.co/{tid % 9973:x}"
        text = text[0].upper() + text[1:] + rng.choice(["!", ".", "?", "!!"])
        posts.append((str(tid), text, label))

        users = communities[truth if truth is not None else True]
        size = int(rng.integers(3, 9))
        members = list(rng.choice(users, size=min(size, len(users)), replace=False))
        lines = [f"['ROOT', 'ROOT', '0.0']->['{members[0]}', '{tid}', '0.0']"]
        times = {members[0]: 0.0}
        for j, u in enumerate(members[1:], start=1):
            parent = members[int(rng.integers(0, j))]
            t = round(times[parent] + float(rng.exponential(30.0)), 2)
            times[u] = t
            lines.append(f"['{parent}', '{tid}', '{times[parent]}']->['{u}', '{tid + j * 1000}', '{t}']")
        (root / "tree" / f"{tid}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    with (root / "source_tweets.txt").open("w", encoding="utf-8") as fh:
        for t, text, _ in posts:
            fh.write(f"{t}\t{text}\n")
    with (root / "label.txt").open("w", encoding="utf-8") as fh:
        for t, _, label in posts:
            fh.write(f"{label}:{t}\n")

    if sequence_sources:
        (root / "sequences").mkdir(exist_ok=True)
        for k, name in enumerate(sequence_sources):
            srng = np.random.default_rng([seed, 1000 + k])
            direction = srng.normal(size=sequence_dim)
            seqs = PretrainedSequenceSet(dim=sequence_dim)
            for t, text, label in posts:
                n_tok = min(len(preprocess_text(text, TextMode.TRANSFORMER)) + 2, 128)
                sign = -1.0 if label == "false" else 1.0
                seqs.sequences[t] = srng.normal(scale=0.5, size=(n_tok, sequence_dim)) + sign * 0.5 * direction
            write_pretrained_sequences(root / "sequences" / f"{name.lower()}.txt", seqs)
    return root
