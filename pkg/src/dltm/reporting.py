"""Topic scores, ranked tables, topic matching, and report export.

All computations are pure reads of a fitted model; export writes each file
atomically and keeps numeric CSV fields at 9 significant digits so
re-loading reproduces values within 1e-9.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._util import atomic_write_text, canonical_json, format_sig, sha256_text
from .corpus import Corpus
from .model import TopicChains, pi_mean_map
from .variational import FittedModel, vocabulary_hash

REPORT_FILES = ("label_freq.csv", "psi.csv", "topic_scores.csv", "top_words.csv", "top_words_pooled.csv")


@dataclass(frozen=True)
class TopicScoreTable:
    """Per-label topic scores: scores[l, t, z] = weight of topic z for label l
    at slot t; averages[l, z] is the mean over slots."""

    labels: tuple[str, ...]
    scores: np.ndarray
    averages: np.ndarray

    def __post_init__(self):
        if np.any(np.abs(self.scores.sum(axis=2) - 1.0) > 1e-9):
            raise ValueError("score rows must sum to 1 within 1e-9")
        if np.any(np.abs(self.averages.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("average rows must sum to 1 within 1e-9")


def topic_scores(model: FittedModel) -> TopicScoreTable:
    """Topic scores from the fitted label proportions, plus per-label averages."""
    scores = pi_mean_map(model.theta.theta)  # [L, T, Z]
    return TopicScoreTable(
        labels=model.label_set,
        scores=scores,
        averages=scores.mean(axis=1),
    )


def top_topics(table: TopicScoreTable, label: str, k: int) -> list[tuple[int, float]]:
    """The k topics with highest average score for a label, as (topic, score)
    pairs with 1-based topic ids; ties break toward the smaller id."""
    if label not in table.labels:
        raise KeyError(f"unknown label {label!r}")
    Z = table.averages.shape[1]
    if not 1 <= k <= Z:
        raise ValueError(f"k must be in 1..{Z}")
    avg = table.averages[table.labels.index(label)]
    order = sorted(range(Z), key=lambda z: (-avg[z], z))
    return [(z + 1, float(avg[z])) for z in order[:k]]


def top_words(model: FittedModel, z: int, t: int, k: int) -> list[tuple[str, float]]:
    """The k most probable terms of topic z (1-based) at slot t (1-based);
    ties break lexicographically by term."""
    if not 1 <= z <= model.Z:
        raise ValueError(f"topic {z} outside 1..{model.Z}")
    if not 1 <= t <= model.T:
        raise ValueError(f"slot {t} outside 1..{model.T}")
    if not 1 <= k <= len(model.vocabulary):
        raise ValueError("k must be in 1..V")
    probs = pi_mean_map(model.beta.beta[z - 1, t - 1])
    return _rank_terms(probs, model.vocabulary.terms, k)


def _rank_terms(probs: np.ndarray, terms: tuple[str, ...], k: int) -> list[tuple[str, float]]:
    order = sorted(range(len(terms)), key=lambda v: (-probs[v], terms[v]))
    return [(terms[v], float(probs[v])) for v in order[:k]]


def match_topics(est: TopicChains, truth: TopicChains) -> tuple[tuple[int, ...], np.ndarray]:
    """Best alignment of estimated topics to true topics under mean
    total-variation distance.

    Returns (perm, distances): perm[i] is the 1-based true topic assigned to
    estimated topic i+1 by the exact optimal assignment, and distances[i] is
    their mean-over-slots total variation distance.
    """
    if est.beta.shape != truth.beta.shape:
        raise ValueError(
            f"dimension mismatch: est {est.beta.shape} vs truth {truth.beta.shape}"
        )
    p_est = pi_mean_map(est.beta)  # [Z, T, V]
    p_truth = pi_mean_map(truth.beta)
    # cost[i, j] = mean over slots of TV(est i, truth j)
    cost = 0.5 * np.abs(p_est[:, None, :, :] - p_truth[None, :, :, :]).sum(axis=3).mean(axis=2)
    rows, cols = linear_sum_assignment(cost)
    perm = tuple(int(c) + 1 for c in cols[np.argsort(rows)])
    distances = cost[np.arange(cost.shape[0]), np.array(perm) - 1]
    return perm, distances


def corpus_stats(corpus: Corpus, fields: tuple[str, ...] = ("hits", "words")) -> dict:
    """Per-slot count, mean and quartiles of numeric document meta fields.

    Slots where a field never appears report count 0 and None statistics.
    Quartiles use linearly interpolated empirical quantiles.
    """
    out: dict[str, list[dict]] = {}
    for name in fields:
        rows = []
        for t in range(1, corpus.T + 1):
            values = [
                float(doc.meta[name])
                for doc in corpus.slots[t - 1]
                if isinstance(doc.meta.get(name), (int, float))
            ]
            if values:
                q1, q2, q3 = np.quantile(values, [0.25, 0.5, 0.75], method="linear")
                rows.append(
                    {"t": t, "count": len(values), "mean": float(np.mean(values)),
                     "q1": float(q1), "median": float(q2), "q3": float(q3)}
                )
            else:
                rows.append({"t": t, "count": 0, "mean": None, "q1": None, "median": None, "q3": None})
        out[name] = rows
    return out


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def stats_csv_text(stats: dict) -> str:
    rows = []
    for name in sorted(stats):
        for rec in stats[name]:
            rows.append(
                [name, rec["t"], rec["count"]]
                + ["" if rec[k] is None else format_sig(rec[k]) for k in ("mean", "q1", "median", "q3")]
            )
    return _csv_text(["field", "t", "count", "mean", "q1", "median", "q3"], rows)


def psi_csv_text(model: FittedModel) -> str:
    rows = []
    for t in range(model.psi.T):
        for l, label in enumerate(model.label_set):
            rows.append(
                [t + 1, label, format_sig(model.psi.mean[t, l]),
                 format_sig(model.psi.ci_low[t, l]), format_sig(model.psi.ci_high[t, l])]
            )
    return _csv_text(["t", "label", "mean", "ci_low", "ci_high"], rows)


def export_report(
    model: FittedModel,
    out_dir,
    top_k: int = 10,
    names: dict[int, str] | None = None,
    input_hashes: dict[str, str] | None = None,
) -> list[Path]:
    """Write the report files for a fitted model into out_dir.

    Emits the run manifest first, then label_freq.csv, psi.csv,
    topic_scores.csv, top_words.csv (per slot) and top_words_pooled.csv
    (averaged over slots), then a checksum listing; every file is written
    atomically and content is deterministic given the model. An optional
    names map adds topic_names.csv.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out_dir}: {exc}") from exc
    top_k = min(top_k, len(model.vocabulary))

    manifest = {
        "format": "dltm-report",
        "seed": int(model.hyper.seed),
        "hyper": {
            "Z": model.hyper.Z, "sigma2": model.hyper.sigma2, "delta2": model.hyper.delta2,
            "a2": model.hyper.a2, "kappa": model.hyper.kappa, "seed": int(model.hyper.seed),
        },
        "level": model.psi.level,
        "top_k": top_k,
        "vocabulary_sha256": vocabulary_hash(model.vocabulary),
        "input_hashes": input_hashes or {},
    }
    written = []

    def emit(name: str, text: str):
        path = out_dir / name
        atomic_write_text(path, text)
        written.append(path)

    emit("manifest.json", canonical_json(manifest) + "\n")

    rows = [
        [t + 1, label, int(model.label_freq[t, l])]
        for t in range(model.label_freq.shape[0])
        for l, label in enumerate(model.label_set)
    ]
    emit("label_freq.csv", _csv_text(["t", "label", "count"], rows))

    emit("psi.csv", psi_csv_text(model))

    table = topic_scores(model)
    rows = [
        [label, t + 1, z + 1, format_sig(table.scores[l, t, z])]
        for l, label in enumerate(model.label_set)
        for t in range(model.T)
        for z in range(model.Z)
    ]
    emit("topic_scores.csv", _csv_text(["label", "t", "topic", "score"], rows))

    rows = []
    for z in range(1, model.Z + 1):
        for t in range(1, model.T + 1):
            for rank, (term, prob) in enumerate(top_words(model, z, t, top_k), start=1):
                rows.append([z, t, rank, term, format_sig(prob)])
    emit("top_words.csv", _csv_text(["topic", "t", "rank", "term", "prob"], rows))

    pooled = pi_mean_map(model.beta.beta).mean(axis=1)  # [Z, V]
    rows = []
    for z in range(model.Z):
        for rank, (term, prob) in enumerate(_rank_terms(pooled[z], model.vocabulary.terms, top_k), start=1):
            rows.append([z + 1, rank, term, format_sig(prob)])
    emit("top_words_pooled.csv", _csv_text(["topic", "rank", "term", "prob"], rows))

    if names:
        rows = [[z, names[z]] for z in sorted(names)]
        emit("topic_names.csv", _csv_text(["topic", "name"], rows))

    checksums = {p.name: sha256_text(p.read_text(encoding="utf-8")) for p in written}
    emit("checksums.json", canonical_json(checksums) + "\n")
    return written
