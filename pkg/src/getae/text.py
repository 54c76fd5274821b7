"""Text normalization, vocabulary, document-to-token encoding and
pretrained token-sequence files."""

from __future__ import annotations

import logging
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

MAX_SEQUENCE_LENGTH = 128
PAD_ID = 0

_URL_RE = re.compile(r"(?:https?://|www\.)\S*", re.IGNORECASE)


class TextMode(str, Enum):
    WORD2VEC = "Word2Vec"
    TRANSFORMER = "Transformer"


class EmptyVocabularyError(ValueError):
    pass


class SequenceFileError(ValueError):
    pass


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str
    author: str
    label: bool  # True = the post is labeled "true"

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be non-empty")


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    text = resources.files("getae").joinpath("data/stopwords_en.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def _strip_punctuation(text: str) -> str:
    # Unicode punctuation (P*) and symbols (S*: '#', '$', emoji, ...) become separators
    return "".join(" " if unicodedata.category(ch)[0] in "PS" else ch for ch in text)


def preprocess_text(text: str, mode: TextMode | str = TextMode.WORD2VEC) -> list[str]:
    """Lowercase, drop URLs and punctuation, split on whitespace.

    Stopwords are removed only in Word2Vec mode.
    """
    mode = TextMode(mode)
    text = _URL_RE.sub(" ", text)
    text = _strip_punctuation(text.lower())
    tokens = text.split()
    if mode is TextMode.WORD2VEC:
        stop = stopwords()
        tokens = [t for t in tokens if t not in stop]
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    token_to_id: dict[str, int]
    id_to_token: dict[int, str]
    counts: dict[str, int]
    min_count: int

    def __len__(self) -> int:
        return len(self.token_to_id)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def tokens(self) -> list[str]:
        return [self.id_to_token[i] for i in range(1, len(self) + 1)]


def build_vocabulary(docs: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counts: dict[str, int] = {}
    for doc in docs:
        for tok in doc:
            counts[tok] = counts.get(tok, 0) + 1
    # dict preserves first-occurrence order
    kept = [t for t, c in counts.items() if c >= min_count]
    if not kept:
        raise EmptyVocabularyError(
            f"no token reaches min_count={min_count} ({len(counts)} distinct tokens seen)"
        )
    token_to_id = {t: i for i, t in enumerate(kept, start=1)}
    id_to_token = {i: t for t, i in token_to_id.items()}
    return Vocabulary(token_to_id, id_to_token, {t: counts[t] for t in kept}, min_count)


@dataclass(frozen=True)
class DocTokenMatrix:
    values: np.ndarray  # (n, k) int64, left zero padded

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def row_ids(self, i: int) -> list[int]:
        row = self.values[i]
        return [int(v) for v in row[row != PAD_ID]]


def _ids(doc: Sequence[str], vocab: Vocabulary) -> list[int]:
    lookup = vocab.token_to_id
    return [lookup[t] for t in doc if t in lookup]


def encode_documents(
    docs: Sequence[Sequence[str]], vocab: Vocabulary, k: int | None = None
) -> DocTokenMatrix:
    """Map tokens to ids and left-pad every row with 0 to a common width.

    ``k`` defaults to the longest encoded document. When given explicitly,
    longer documents keep their last ``k`` ids.
    """
    if len(vocab) == 0:
        raise EmptyVocabularyError("cannot encode with an empty vocabulary")
    encoded = [_ids(doc, vocab) for doc in docs]
    if k is None:
        k = max((len(e) for e in encoded), default=0)
    out = np.zeros((len(encoded), k), dtype=np.int64)
    for i, ids in enumerate(encoded):
        if len(ids) > k:
            logger.warning("document %d has %d ids, truncating from the left to %d", i, len(ids), k)
            ids = ids[len(ids) - k:]
        if ids:
            out[i, k - len(ids):] = ids
    return DocTokenMatrix(out)


@dataclass
class PretrainedSequenceSet:
    """Per-document token vectors produced by an external transformer."""

    dim: int
    sequences: dict[str, np.ndarray] = field(default_factory=dict)
    max_len: int = MAX_SEQUENCE_LENGTH

    def __len__(self) -> int:
        return len(self.sequences)

    def __getitem__(self, doc_id: str) -> np.ndarray:
        return self.sequences[doc_id]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.sequences

    def longest(self) -> int:
        return max((s.shape[0] for s in self.sequences.values()), default=0)


def load_pretrained_sequences(path: str | Path, max_len: int = MAX_SEQUENCE_LENGTH) -> PretrainedSequenceSet:
    """Read a ``dim=<d>`` headed file of ``doc_id<TAB>v1,v2,...`` token lines.

    Documents are separated by blank lines.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().strip()
        m = re.fullmatch(r"dim=(\d+)", header)
        if m is None:
            raise SequenceFileError(f"{path}: missing 'dim=<d>' header, got {header!r}")
        dim = int(m.group(1))
        if dim < 1:
            raise SequenceFileError(f"{path}: dim must be positive")

        result = PretrainedSequenceSet(dim=dim, max_len=max_len)
        current_id: str | None = None
        rows: list[list[float]] = []

        def flush(lineno: int):
            nonlocal current_id, rows
            if current_id is None:
                return
            if current_id in result.sequences:
                raise SequenceFileError(f"{path}:{lineno}: duplicate document {current_id!r}")
            if len(rows) > max_len:
                raise SequenceFileError(
                    f"{path}:{lineno}: document {current_id!r} has {len(rows)} tokens (max {max_len})"
                )
            result.sequences[current_id] = np.asarray(rows, dtype=np.float64)
            current_id, rows = None, []

        lineno = 1
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line.strip():
                flush(lineno)
                continue
            doc_id, sep, payload = line.partition("\t")
            if not sep or not doc_id:
                raise SequenceFileError(f"{path}:{lineno}: malformed record")
            if current_id is not None and doc_id != current_id:
                flush(lineno)
            current_id = doc_id
            try:
                values = [float(v) for v in payload.split(",")]
            except ValueError as exc:
                raise SequenceFileError(f"{path}:{lineno}: non-numeric value ({exc})") from None
            if len(values) != dim:
                raise SequenceFileError(f"{path}:{lineno}: expected {dim} values, got {len(values)}")
            rows.append(values)
        flush(lineno + 1)
    return result


def write_pretrained_sequences(path: str | Path, seqs: PretrainedSequenceSet) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"dim={seqs.dim}\n")
        for doc_id, arr in seqs.sequences.items():
            for row in arr:
                fh.write(doc_id + "\t" + ",".join(repr(float(v)) for v in row) + "\n")
            fh.write("\n")
