"""Corpus types and construction: vocabulary, documents, time slices, file formats.

Raw input is UTF-8 line-delimited JSON, one document per line with fields
`id`, `year`, `labels`, `text` and optional `meta`. An optional first line
may declare the label set: a JSON object with a `label_set` key and no
`text`. Processed corpora round-trip through a canonical line-delimited
format: a header object (T, labels, vocabulary) followed by one object per
document with sparse `[index, count]` pairs.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._util import atomic_write_text
from .errors import DataError
from .preprocess import PreprocessConfig, preprocess_text

logger = logging.getLogger(__name__)

CORPUS_FORMAT = "dltm-corpus"
CORPUS_VERSION = 1


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Vocabulary:
    """Ordered term list plus the term -> index mapping."""

    terms: tuple[str, ...]
    index: dict[str, int] = field(repr=False)

    def __post_init__(self):
        if len(self.terms) != len(self.index):
            raise ValueError("terms are not unique")
        for i, term in enumerate(self.terms):
            if self.index.get(term) != i:
                raise ValueError(f"index mismatch for term {term!r}")
            if not term or not term.isascii() or not term.isalpha() or term != term.lower():
                raise ValueError(f"invalid vocabulary term {term!r}")

    @classmethod
    def from_terms(cls, terms) -> "Vocabulary":
        terms = tuple(terms)
        return cls(terms=terms, index={t: i for i, t in enumerate(terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index


@dataclass(frozen=True)
class SparseCounts:
    """Sparse non-negative integer vector: sorted unique indices with counts."""

    indices: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        cnt = np.asarray(self.counts, dtype=np.int64)
        if idx.shape != cnt.shape or idx.ndim != 1:
            raise ValueError("indices and counts must be 1-d arrays of equal length")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0):
            raise ValueError("indices must be sorted, unique, non-negative")
        if np.any(cnt <= 0):
            raise ValueError("counts must be strictly positive")
        object.__setattr__(self, "indices", _frozen(idx))
        object.__setattr__(self, "counts", _frozen(cnt))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict[int, int]:
        return {int(i): int(c) for i, c in zip(self.indices, self.counts)}

    def to_dense(self, size: int) -> np.ndarray:
        dense = np.zeros(size, dtype=np.int64)
        dense[self.indices] = self.counts
        return dense


EMPTY_COUNTS = SparseCounts(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))


@dataclass(frozen=True)
class Document:
    """One bag-of-words document in a time slot with at least one label."""

    id: str
    time_slot: int
    labels: tuple[str, ...]
    counts: SparseCounts
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) == 0:
            raise DataError(f"document {self.id!r} has an empty label list")
        if len(set(self.labels)) != len(self.labels):
            raise DataError(f"document {self.id!r} has duplicate labels")
        if self.time_slot < 1:
            raise DataError(f"document {self.id!r} has time_slot {self.time_slot} < 1")
        if self.counts.total < 1:
            raise DataError(f"document {self.id!r} has no tokens")

    @property
    def token_total(self) -> int:
        return self.counts.total

    @property
    def n_labels(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Corpus:
    """Time-sliced labeled corpus: T slots of documents over a shared vocabulary."""

    T: int
    label_set: tuple[str, ...]
    vocabulary: Vocabulary
    slots: tuple[tuple[Document, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "label_set", tuple(self.label_set))
        object.__setattr__(self, "slots", tuple(tuple(s) for s in self.slots))
        if len(self.slots) != self.T:
            raise DataError(f"expected {self.T} slots, got {len(self.slots)}")
        labels = set(self.label_set)
        if len(labels) != len(self.label_set):
            raise DataError("label_set has duplicates")
        V = len(self.vocabulary)
        for t, slot in enumerate(self.slots, start=1):
            for doc in slot:
                if doc.time_slot != t:
                    raise DataError(f"document {doc.id!r} in slot {t} has time_slot {doc.time_slot}")
                if not set(doc.labels) <= labels:
                    raise DataError(f"document {doc.id!r} has labels outside the corpus label set")
                if doc.counts.indices.size and doc.counts.indices[-1] >= V:
                    raise DataError(f"document {doc.id!r} has term indices beyond the vocabulary")

    @property
    def n_labels(self) -> int:
        return len(self.label_set)

    @property
    def n_docs(self) -> int:
        return sum(len(s) for s in self.slots)

    def documents(self):
        for slot in self.slots:
            yield from slot

    def label_index(self) -> dict[str, int]:
        return {l: i for i, l in enumerate(self.label_set)}


def build_vocabulary(token_lists, min_doc_freq: int = 1) -> Vocabulary:
    """Build the lexicographically sorted vocabulary of terms appearing in at
    least `min_doc_freq` distinct token lists."""
    if min_doc_freq < 1:
        raise ValueError("min_doc_freq must be >= 1")
    doc_freq = Counter()
    for tokens in token_lists:
        doc_freq.update(set(tokens))
    terms = sorted(t for t, n in doc_freq.items() if n >= min_doc_freq)
    if not terms:
        raise DataError("empty vocabulary: no term meets the document-frequency threshold")
    return Vocabulary.from_terms(terms)


def bag_of_words(tokens, vocab: Vocabulary) -> SparseCounts:
    """Count in-vocabulary tokens; out-of-vocabulary tokens are dropped."""
    counts = Counter(vocab.index[t] for t in tokens if t in vocab.index)
    if not counts:
        return EMPTY_COUNTS
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.int64)
    return SparseCounts(indices, values)


_META_NUMERIC = ("hits", "words")


def _parse_raw_record(obj: dict, line_no: int) -> dict:
    if not isinstance(obj, dict):
        raise DataError(f"line {line_no}: record is not a JSON object")
    for key, kind in (("id", str), ("year", int), ("labels", list), ("text", str)):
        if key not in obj:
            raise DataError(f"line {line_no}: missing field {key!r}")
        if not isinstance(obj[key], kind):
            raise DataError(f"line {line_no}: field {key!r} has wrong type")
    if not obj["labels"]:
        raise DataError(f"line {line_no}: record {obj['id']!r} has an empty label list")
    if len(set(obj["labels"])) != len(obj["labels"]):
        raise DataError(f"line {line_no}: record {obj['id']!r} has duplicate labels")
    meta = obj.get("meta", {})
    if not isinstance(meta, dict):
        raise DataError(f"line {line_no}: field 'meta' has wrong type")
    for key in _META_NUMERIC:
        if key in meta and not isinstance(meta[key], (int, float)):
            raise DataError(f"line {line_no}: meta field {key!r} is not numeric")
    return obj


def load_corpus(path, config: PreprocessConfig, min_doc_freq: int = 1) -> Corpus:
    """Load a raw line-delimited JSON corpus, preprocess, and assemble slices.

    Years map to consecutive slots starting at the minimum year (gaps still
    consume a slot). Documents that end up with no tokens, before or after
    vocabulary filtering, are dropped with a warning.
    """
    path = Path(path)
    declared_labels = None
    records = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read corpus file {path}: {exc}") from exc
    with fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {line_no}: invalid JSON ({exc})") from exc
            if line_no == 1 and isinstance(obj, dict) and "label_set" in obj and "text" not in obj:
                declared_labels = tuple(obj["label_set"])
                continue
            records.append((line_no, _parse_raw_record(obj, line_no)))
    if not records:
        raise DataError(f"corpus file {path} contains no documents")

    token_lists = [preprocess_text(rec["text"], config) for _, rec in records]
    kept = [(rec, toks) for (_, rec), toks in zip(records, token_lists) if toks]
    for (_, rec), toks in zip(records, token_lists):
        if not toks:
            logger.warning("dropped empty document id=%s (no tokens after preprocessing)", rec["id"])
    if not kept:
        raise DataError("all documents empty after preprocessing")

    vocab = build_vocabulary([toks for _, toks in kept], min_doc_freq)

    min_year = min(rec["year"] for rec, _ in kept)
    max_year = max(rec["year"] for rec, _ in kept)
    T = max_year - min_year + 1

    if declared_labels is None:
        label_set = tuple(sorted({l for rec, _ in kept for l in rec["labels"]}))
    else:
        label_set = declared_labels

    slots: list[list[Document]] = [[] for _ in range(T)]
    for rec, toks in kept:
        counts = bag_of_words(toks, vocab)
        if counts.total == 0:
            logger.warning("dropped empty document id=%s (no in-vocabulary tokens)", rec["id"])
            continue
        meta = {k: rec.get("meta", {})[k] for k in rec.get("meta", {})}
        meta.setdefault("year", rec["year"])
        doc = Document(
            id=rec["id"],
            time_slot=rec["year"] - min_year + 1,
            labels=tuple(rec["labels"]),
            counts=counts,
            meta=meta,
        )
        slots[doc.time_slot - 1].append(doc)
    return Corpus(T=T, label_set=label_set, vocabulary=vocab, slots=tuple(tuple(s) for s in slots))


def save_corpus(corpus: Corpus, path) -> None:
    """Write the canonical processed-corpus file (deterministic bytes)."""
    lines = [
        json.dumps(
            {
                "format": CORPUS_FORMAT,
                "version": CORPUS_VERSION,
                "T": corpus.T,
                "labels": list(corpus.label_set),
                "vocabulary": list(corpus.vocabulary.terms),
            },
            sort_keys=True,
            separators=(",", ":"),
        )
    ]
    for doc in corpus.documents():
        rec = {
            "id": doc.id,
            "time_slot": doc.time_slot,
            "labels": list(doc.labels),
            "counts": [[int(i), int(c)] for i, c in zip(doc.counts.indices, doc.counts.counts)],
        }
        if doc.meta:
            rec["meta"] = {k: doc.meta[k] for k in sorted(doc.meta)}
        lines.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_corpus(path) -> Corpus:
    """Read a canonical processed-corpus file written by :func:`save_corpus`."""
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read corpus file {path}: {exc}") from exc
    with fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line 1: invalid JSON header ({exc})") from exc
        if not isinstance(header, dict) or header.get("format") != CORPUS_FORMAT:
            raise DataError(
                f"{path} is not a processed corpus file; run `dltm preprocess` or `dltm simulate` first"
            )
        T = int(header["T"])
        label_set = tuple(header["labels"])
        vocab = Vocabulary.from_terms(header["vocabulary"])
        slots: list[list[Document]] = [[] for _ in range(T)]
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {line_no}: invalid JSON ({exc})") from exc
            try:
                pairs = rec["counts"]
                counts = SparseCounts(
                    np.array([p[0] for p in pairs], dtype=np.int64),
                    np.array([p[1] for p in pairs], dtype=np.int64),
                )
                doc = Document(
                    id=rec["id"],
                    time_slot=int(rec["time_slot"]),
                    labels=tuple(rec["labels"]),
                    counts=counts,
                    meta=rec.get("meta", {}),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"line {line_no}: malformed document record ({exc})") from exc
            if not 1 <= doc.time_slot <= T:
                raise DataError(f"line {line_no}: time_slot {doc.time_slot} outside 1..{T}")
            slots[doc.time_slot - 1].append(doc)
    return Corpus(T=T, label_set=label_set, vocabulary=vocab, slots=tuple(tuple(s) for s in slots))


def label_frequency(corpus: Corpus) -> np.ndarray:
    """Document counts per (time slot, label); a k-label document increments k cells.

    Rows follow slots 1..T, columns follow corpus.label_set.
    """
    table = np.zeros((corpus.T, corpus.n_labels), dtype=np.int64)
    index = corpus.label_index()
    for doc in corpus.documents():
        for label in doc.labels:
            table[doc.time_slot - 1, index[label]] += 1
    return table
