"""Forward simulation of labeled, time-sliced corpora.

Runs the generative process: Gaussian random-walk drift of the per-topic
word naturals and the mean topic profile, per-label topic naturals drawn
fresh around the profile each slot, a Dirichlet chain for label
probabilities, then per-document label draws and per-word (label, topic,
word) sampling. Fully reproducible from the seed; one call uses one RNG
and is single-threaded, so parallel simulations need distinct seeds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._util import atomic_write_text, canonical_json
from .corpus import Corpus, Document, SparseCounts, Vocabulary
from .errors import DataError
from .model import (
    Hyperparameters,
    LabelProbSeries,
    LabelTopicChains,
    MeanChain,
    TopicChains,
    pi_mean_map,
)

TRUTH_FORMAT = "dltm-truth"
TRUTH_VERSION = 1

# Concentration floor keeping the Dirichlet chain sampleable if a component
# collapses to zero; never reached at default kappa.
_MIN_CONCENTRATION = 1e-300


@dataclass(frozen=True)
class SimDims:
    """Corpus dimensions for the simulator."""

    T: int
    L: int
    V: int
    docs_per_slot: int
    words_per_doc: int
    labels_per_doc: int = 1

    def __post_init__(self):
        for name in ("T", "L", "V", "docs_per_slot", "words_per_doc", "labels_per_doc"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.labels_per_doc > self.L:
            raise ValueError("labels_per_doc cannot exceed the number of labels")


@dataclass(frozen=True)
class SimInit:
    """Initial conditions; any field left None takes the documented default.

    beta0 defaults to seeded standard-normal naturals per topic (distinct
    topics), alpha0 to zeros, psi0 to uniform. psi_series, when given,
    replaces the Dirichlet chain with fixed per-slot label probabilities;
    it exists so tests can generate prescribed popularity trajectories.
    """

    beta0: np.ndarray | None = None
    alpha0: np.ndarray | None = None
    psi0: np.ndarray | None = None
    psi_series: np.ndarray | None = None


@dataclass(frozen=True)
class DocAssignment:
    """Per-token latent draws for one document: label indices (0-based into
    the corpus label set) and topics (1-based)."""

    doc_id: str
    x: np.ndarray
    z: np.ndarray


@dataclass(frozen=True)
class SimulationTruth:
    """Everything the simulator drew: all chains plus per-token assignments."""

    beta: TopicChains
    alpha: MeanChain
    theta: LabelTopicChains
    psi: LabelProbSeries
    assignments: tuple[DocAssignment, ...] = field(repr=False)


def _term_names(V: int) -> tuple[str, ...]:
    """Fixed-width base-26 letter codes; lexicographic order equals index order."""
    width = max(1, math.ceil(math.log(max(V, 2), 26)))
    while 26**width < V:
        width += 1
    names = []
    for i in range(V):
        code = []
        x = i
        for _ in range(width):
            code.append(chr(ord("a") + x % 26))
            x //= 26
        names.append("".join(reversed(code)))
    return tuple(names)


def _label_names(L: int) -> tuple[str, ...]:
    width = len(str(L))
    return tuple(f"label{i + 1:0{width}d}" for i in range(L))


def _draw_labels_without_replacement(rng: np.random.Generator, psi_t: np.ndarray, k: int) -> np.ndarray:
    """k distinct label indices via sequential renormalized picks from psi_t."""
    remaining = psi_t.astype(np.float64).copy()
    chosen = np.empty(k, dtype=np.int64)
    for j in range(k):
        total = remaining.sum()
        if total <= 0:
            # All residual mass gone (degenerate psi); fall back to uniform over what's left.
            probs = (remaining >= 0).astype(np.float64)
            probs[chosen[:j]] = 0.0
            probs /= probs.sum()
        else:
            probs = remaining / total
        pick = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
        pick = min(pick, len(psi_t) - 1)
        chosen[j] = pick
        remaining[pick] = 0.0
    return chosen


def _categorical(rng: np.random.Generator, cdf: np.ndarray, n: int) -> np.ndarray:
    draws = np.searchsorted(cdf, rng.random(n), side="right")
    return np.minimum(draws, len(cdf) - 1)


def simulate_corpus(
    hyper: Hyperparameters,
    dims: SimDims,
    init: SimInit | None = None,
) -> tuple[Corpus, SimulationTruth]:
    """Generate a corpus and the full latent truth behind it.

    Steps, per slot t = 1..T: drift the topic naturals and the mean profile,
    draw per-label topic naturals around the profile, step the label
    probability Dirichlet chain, then for each document draw distinct labels
    (sequential renormalized picks), and per word a uniform label pick, a
    topic from the label's proportions, and a word from the topic.
    """
    init = init or SimInit()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(hyper.seed)))
    Z, T, L, V = hyper.Z, dims.T, dims.L, dims.V

    beta0 = np.asarray(init.beta0, dtype=np.float64) if init.beta0 is not None else rng.standard_normal((Z, V))
    alpha0 = np.asarray(init.alpha0, dtype=np.float64) if init.alpha0 is not None else np.zeros(Z)
    psi0 = np.asarray(init.psi0, dtype=np.float64) if init.psi0 is not None else np.full(L, 1.0 / L)
    if beta0.shape != (Z, V) or alpha0.shape != (Z,) or psi0.shape != (L,):
        raise ValueError("init shapes do not match (Z, V, L)")
    if np.any(psi0 < 0) or abs(psi0.sum() - 1.0) > 1e-9:
        raise ValueError("psi0 must be a probability vector")
    psi_series = None
    if init.psi_series is not None:
        psi_series = np.asarray(init.psi_series, dtype=np.float64)
        if psi_series.shape != (T, L):
            raise ValueError("psi_series must have shape [T, L]")

    sd_sigma = math.sqrt(hyper.sigma2)
    sd_delta = math.sqrt(hyper.delta2)
    sd_a = math.sqrt(hyper.a2)

    beta = np.empty((Z, T, V))
    alpha = np.empty((T, Z))
    theta = np.empty((L, T, Z))
    psi = np.empty((T, L))

    prev_beta, prev_alpha, prev_psi = beta0, alpha0, psi0
    for t in range(T):
        prev_beta = prev_beta + rng.normal(0.0, sd_sigma, size=(Z, V))
        beta[:, t, :] = prev_beta
        prev_alpha = prev_alpha + rng.normal(0.0, sd_delta, size=Z)
        alpha[t] = prev_alpha
        theta[:, t, :] = prev_alpha[None, :] + rng.normal(0.0, sd_a, size=(L, Z))
        if psi_series is not None:
            prev_psi = psi_series[t] / psi_series[t].sum()
        else:
            conc = np.maximum(hyper.kappa * prev_psi, _MIN_CONCENTRATION)
            draws = rng.standard_gamma(conc)
            total = draws.sum()
            prev_psi = draws / total if total > 0 else np.full(L, 1.0 / L)
        psi[t] = prev_psi

    label_set = _label_names(L)
    vocab = Vocabulary.from_terms(_term_names(V))

    # Per-slot cumulative distributions for fast categorical sampling.
    theta_cdf = np.cumsum(pi_mean_map(theta), axis=-1)
    beta_cdf = np.cumsum(pi_mean_map(beta), axis=-1)

    id_width = len(str(dims.docs_per_slot))
    slots = []
    assignments = []
    for t in range(T):
        docs = []
        for d in range(dims.docs_per_slot):
            doc_id = f"sim-t{t + 1}-d{d + 1:0{id_width}d}"
            label_idx = _draw_labels_without_replacement(rng, psi[t], dims.labels_per_doc)
            x = label_idx[rng.integers(0, dims.labels_per_doc, size=dims.words_per_doc)]
            z = np.empty(dims.words_per_doc, dtype=np.int64)
            for l in np.unique(x):
                mask = x == l
                z[mask] = _categorical(rng, theta_cdf[l, t], int(mask.sum()))
            words = np.empty(dims.words_per_doc, dtype=np.int64)
            for topic in np.unique(z):
                mask = z == topic
                words[mask] = _categorical(rng, beta_cdf[topic, t], int(mask.sum()))
            idx, cnt = np.unique(words, return_counts=True)
            docs.append(
                Document(
                    id=doc_id,
                    time_slot=t + 1,
                    labels=tuple(label_set[i] for i in sorted(label_idx)),
                    counts=SparseCounts(idx, cnt),
                )
            )
            assignments.append(DocAssignment(doc_id=doc_id, x=x, z=z + 1))
        slots.append(tuple(docs))

    corpus = Corpus(T=T, label_set=label_set, vocabulary=vocab, slots=tuple(slots))
    truth = SimulationTruth(
        beta=TopicChains(beta),
        alpha=MeanChain(alpha),
        theta=LabelTopicChains(theta),
        psi=LabelProbSeries(psi),
        assignments=tuple(assignments),
    )
    return corpus, truth


def save_truth(truth: SimulationTruth, hyper: Hyperparameters, path) -> None:
    """Write the truth sidecar JSON next to a simulated corpus."""
    payload = {
        "format": TRUTH_FORMAT,
        "version": TRUTH_VERSION,
        "hyper": {
            "Z": hyper.Z,
            "sigma2": hyper.sigma2,
            "delta2": hyper.delta2,
            "a2": hyper.a2,
            "kappa": hyper.kappa,
            "seed": int(hyper.seed),
        },
        "beta": truth.beta.beta.tolist(),
        "alpha": truth.alpha.alpha.tolist(),
        "theta": truth.theta.theta.tolist(),
        "psi": truth.psi.psi.tolist(),
        "assignments": [
            {"id": a.doc_id, "x": a.x.tolist(), "z": a.z.tolist()} for a in truth.assignments
        ],
    }
    atomic_write_text(path, canonical_json(payload) + "\n")


def load_truth(path) -> tuple[SimulationTruth, Hyperparameters]:
    """Read a truth sidecar written by :func:`save_truth`."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != TRUTH_FORMAT:
        raise DataError(f"{path} is not a simulation truth file")
    h = payload["hyper"]
    hyper = Hyperparameters(
        Z=int(h["Z"]), sigma2=h["sigma2"], delta2=h["delta2"], a2=h["a2"],
        kappa=h["kappa"], seed=int(h["seed"]),
    )
    truth = SimulationTruth(
        beta=TopicChains(np.array(payload["beta"], dtype=np.float64)),
        alpha=MeanChain(np.array(payload["alpha"], dtype=np.float64)),
        theta=LabelTopicChains(np.array(payload["theta"], dtype=np.float64)),
        psi=LabelProbSeries(np.array(payload["psi"], dtype=np.float64)),
        assignments=tuple(
            DocAssignment(
                doc_id=a["id"],
                x=np.array(a["x"], dtype=np.int64),
                z=np.array(a["z"], dtype=np.int64),
            )
            for a in payload["assignments"]
        ),
    )
    return truth, hyper
