"""Variational EM for the topic side of the model.

Documents are split into pseudo-documents, one per (document, label) pair,
each carrying the document's counts at weight 1/L_d. The E-step assigns
per-word-type topic responsibilities from the current label proportions
and topic word distributions; the M-step turns expected counts into
Gaussian pseudo-observations on the natural-parameter scale and re-smooths
every chain:

  * topic word chains: per-(topic, term) random-walk smoothing with drift
    sigma2 over normalized log expected counts, pseudo-variance
    V / (slot topic mass + eps); zero-count terms are missing slots;
  * label proportions: per-(label, slot) conjugate Gaussian combination of
    the log expected-count proportions (pseudo-variance Z / (label mass +
    eps)) with the N(mean profile, a2) prior;
  * mean profile: random-walk smoothing with drift delta2 over the
    label-averaged proportions, pseudo-variance a2 / L.

The tracked objective is the expected weighted log likelihood under the
responsibilities plus chain log priors at the point estimates minus the
responsibility entropy; the E-step maximizes it exactly, the M-step
through the quadratic surrogates above.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from ._util import STREAM_INIT, STREAM_PSI, atomic_write_text, canonical_json, derived_seed, rng_from, sha256_text
from .corpus import Corpus, SparseCounts, Vocabulary, label_frequency
from .errors import DataError, NumericalError
from .kalman import kalman_smooth_chain
from .label_probs import PsiPosterior, fit_label_probs
from .model import Hyperparameters, LabelTopicChains, MeanChain, TopicChains, log_softmax

MODEL_FORMAT = "dltm-model"
MODEL_VERSION = 1

# Count smoothing inside log-proportion observations.
EPSILON = 1e-8
# Variance of the anchor state that ties the first slot of the beta and
# alpha chains to their initialization.
ANCHOR_VAR = 1.0
# Standard deviation of the seeded initialization jitter that breaks topic
# symmetry deterministically.
INIT_JITTER = 0.01


@dataclass(frozen=True)
class PseudoDoc:
    """One (document, label) pair carrying the document's counts at weight 1/L_d."""

    doc_id: str
    label: str
    time_slot: int
    counts: SparseCounts
    weight: float

    def __post_init__(self):
        if not 0 < self.weight <= 1:
            raise ValueError("pseudo-doc weight must be in (0, 1]")


def reweight_pseudo_docs(corpus: Corpus) -> list[PseudoDoc]:
    """Split every document into one pseudo-doc per label, weight 1/L_d.

    Order is deterministic: documents in corpus order, labels in document
    order. All pseudo-docs of a document share its counts object.
    """
    out = []
    for doc in corpus.documents():
        w = 1.0 / doc.n_labels
        for label in doc.labels:
            out.append(
                PseudoDoc(doc_id=doc.id, label=label, time_slot=doc.time_slot,
                          counts=doc.counts, weight=w)
            )
    return out


@dataclass(frozen=True)
class _SlotPack:
    """Flat per-slot arrays, one row per (pseudo-doc, word type) pair."""

    pdoc: np.ndarray
    word: np.ndarray
    count: np.ndarray
    weight: np.ndarray
    label: np.ndarray

    @property
    def size(self) -> int:
        return self.word.size


def pack_pseudo_docs(pseudo: list[PseudoDoc], T: int, labels: tuple[str, ...]) -> list[_SlotPack]:
    """Group pseudo-docs by slot into flat arrays for vectorized passes."""
    label_row = {l: i for i, l in enumerate(labels)}
    per_slot: list[list[np.ndarray]] = [[[] for _ in range(5)] for _ in range(T)]
    for i, p in enumerate(pseudo):
        if not 1 <= p.time_slot <= T:
            raise ValueError(f"pseudo-doc {p.doc_id!r} has slot {p.time_slot} outside 1..{T}")
        cols = per_slot[p.time_slot - 1]
        n = p.counts.indices.size
        cols[0].append(np.full(n, i, dtype=np.int64))
        cols[1].append(p.counts.indices)
        cols[2].append(p.counts.counts.astype(np.float64))
        cols[3].append(np.full(n, p.weight))
        cols[4].append(np.full(n, label_row[p.label], dtype=np.int64))
    packs = []
    for cols in per_slot:
        if cols[0]:
            packs.append(_SlotPack(*(np.concatenate(c) for c in cols)))
        else:
            packs.append(
                _SlotPack(
                    np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                    np.empty(0), np.empty(0), np.empty(0, dtype=np.int64),
                )
            )
    return packs


@dataclass
class VariationalState:
    """Working state of the EM loop: smoothed chain estimates with variances,
    prior anchors, per-slot responsibilities, and the objective trace."""

    beta_hat: np.ndarray
    beta_var: np.ndarray
    theta_hat: np.ndarray
    theta_var: np.ndarray
    alpha_hat: np.ndarray
    alpha_var: np.ndarray
    beta_anchor: np.ndarray
    alpha_anchor: np.ndarray
    labels: tuple[str, ...]
    resp: list[np.ndarray] = field(default_factory=list)
    elbo_trace: list[float] = field(default_factory=list)

    @property
    def Z(self) -> int:
        return self.beta_hat.shape[0]

    @property
    def T(self) -> int:
        return self.beta_hat.shape[1]

    @property
    def V(self) -> int:
        return self.beta_hat.shape[2]

    @property
    def L(self) -> int:
        return self.theta_hat.shape[0]

    def validate(self) -> None:
        for name in ("beta_hat", "theta_hat", "alpha_hat"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericalError(f"non-finite entries in {name}")
        for name in ("beta_var", "theta_var", "alpha_var"):
            if not np.all(getattr(self, name) > 0):
                raise NumericalError(f"non-positive variances in {name}")
        for r in self.resp:
            if r.size and np.any(np.abs(r.sum(axis=1) - 1.0) > 1e-10):
                raise NumericalError("responsibilities do not normalize to 1")


def _as_packs(pseudo, state: VariationalState) -> list[_SlotPack]:
    if pseudo and isinstance(pseudo[0], _SlotPack):
        return pseudo
    return pack_pseudo_docs(list(pseudo), state.T, state.labels)


def _slot_e_step(pack: _SlotPack, theta_t: np.ndarray, log_beta_t: np.ndarray,
                 V: int, L: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    Z = theta_t.shape[1]
    if pack.size == 0:
        return np.empty((0, Z)), np.zeros((Z, V)), np.zeros((L, Z))
    scores = theta_t[pack.label] + log_beta_t[:, pack.word].T
    scores -= scores.max(axis=1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=1, keepdims=True)
    resp = scores
    wc = pack.weight * pack.count
    contrib = resp * wc[:, None]
    n_t = np.empty((Z, V))
    m_t = np.empty((L, Z))
    for z in range(Z):
        n_t[z] = np.bincount(pack.word, weights=contrib[:, z], minlength=V)
        m_t[:, z] = np.bincount(pack.label, weights=contrib[:, z], minlength=L)
    return resp, n_t, m_t


def e_step(pseudo, state: VariationalState, threads: int = 1):
    """Update responsibilities and expected counts for the current state.

    For a pseudo-doc with label l in slot t and word type v, the topic
    responsibility is proportional to exp(theta[l,t,z] + log pi(beta)[z,t,v]).
    Returns (resp, n_hat, m_hat): per-slot responsibility arrays (also stored
    on the state), expected word-topic counts [Z,T,V], and expected
    label-topic masses [L,T,Z].
    """
    packs = _as_packs(pseudo, state)
    Z, T, V, L = state.Z, state.T, state.V, state.L
    log_beta = log_softmax(state.beta_hat)
    n_hat = np.zeros((Z, T, V))
    m_hat = np.zeros((L, T, Z))
    resp: list[np.ndarray] = [None] * T  # type: ignore[list-item]

    def work(t: int):
        return _slot_e_step(packs[t], state.theta_hat[:, t, :], log_beta[:, t, :], V, L)

    if threads > 1 and T > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(T)))
    else:
        results = [work(t) for t in range(T)]
    for t, (r, n_t, m_t) in enumerate(results):
        resp[t] = r
        n_hat[:, t, :] = n_t
        m_hat[:, t, :] = m_t
    state.resp = resp
    return resp, n_hat, m_hat


def m_step(n_hat: np.ndarray, m_hat: np.ndarray, hyper: Hyperparameters,
           state: VariationalState) -> VariationalState:
    """Re-estimate all chains from expected counts; mutates and returns the state.

    Topic chains are smoothed per (topic, term) with drift sigma2; label
    proportions combine their log-proportion observation with the
    N(mean profile, a2) prior; the mean profile is smoothed with drift
    delta2 over label-averaged proportions. Zero-mass slots and zero-count
    terms enter as missing observations.
    """
    Z, T, V, L = state.Z, state.T, state.V, state.L

    # Topic word chains.
    mass = n_hat.sum(axis=2)  # [Z, T]
    with np.errstate(divide="ignore"):
        obs = np.log(n_hat + EPSILON) - np.log(mass + V * EPSILON)[:, :, None]
    obs[n_hat == 0] = np.nan
    obs[mass == 0] = np.nan
    obs_var = (V / (mass + EPSILON))[:, :, None]
    mean, var = kalman_smooth_chain(
        np.moveaxis(obs, 1, 0), np.moveaxis(np.broadcast_to(obs_var, obs.shape), 1, 0),
        hyper.sigma2, init_mean=state.beta_anchor, init_var=ANCHOR_VAR,
    )
    state.beta_hat = np.moveaxis(mean, 0, 1)
    state.beta_var = np.moveaxis(var, 0, 1)

    # Label proportion estimates: conjugate Gaussian update per (label, slot).
    label_mass = m_hat.sum(axis=2)  # [L, T]
    with np.errstate(divide="ignore"):
        theta_obs = np.log(m_hat + EPSILON) - np.log(label_mass + Z * EPSILON)[:, :, None]
    theta_obs_var = (Z / (label_mass + EPSILON))[:, :, None]
    prior_mean = state.alpha_hat[None, :, :]
    prior_prec = 1.0 / hyper.a2
    obs_prec = 1.0 / theta_obs_var
    post_prec = prior_prec + obs_prec
    post = (prior_mean * prior_prec + theta_obs * obs_prec) / post_prec
    missing = (label_mass == 0)[:, :, None]
    state.theta_hat = np.where(missing, np.broadcast_to(prior_mean, post.shape), post)
    state.theta_var = np.where(missing, hyper.a2, 1.0 / post_prec)

    # Mean profile chain.
    alpha_obs = state.theta_hat.mean(axis=0)  # [T, Z]
    alpha_obs_var = hyper.a2 / L
    mean, var = kalman_smooth_chain(
        alpha_obs, alpha_obs_var, hyper.delta2,
        init_mean=state.alpha_anchor, init_var=ANCHOR_VAR,
    )
    state.alpha_hat = mean
    state.alpha_var = var
    return state


def _gauss_logpdf(x: np.ndarray, mean, var) -> np.ndarray:
    return -0.5 * (np.log(2.0 * math.pi * var) + (x - mean) ** 2 / var)


def elbo(pseudo, state: VariationalState, hyper: Hyperparameters) -> float:
    """Tracked objective at the state's responsibilities and point estimates.

    Expected weighted token log likelihood under the responsibilities, plus
    Gaussian chain log priors evaluated at the smoothed means, minus the
    responsibility entropy term. Deterministic given the state.
    """
    packs = _as_packs(pseudo, state)
    if len(state.resp) != state.T:
        raise ValueError("state has no responsibilities; run e_step first")
    log_beta = log_softmax(state.beta_hat)
    theta_centered = log_softmax(state.theta_hat)

    total = 0.0
    for t, pack in enumerate(packs):
        if pack.size == 0:
            continue
        r = state.resp[t]
        if r.shape != (pack.size, state.Z):
            raise ValueError("responsibilities do not match the pseudo-doc pack")
        loglik = theta_centered[pack.label, t, :] + log_beta[:, t, pack.word].T
        wc = pack.weight * pack.count
        total += float((wc[:, None] * (r * loglik - xlogy(r, r))).sum())

    sigma2, delta2, a2 = hyper.sigma2, hyper.delta2, hyper.a2
    beta = state.beta_hat
    total += float(_gauss_logpdf(beta[:, 0, :], state.beta_anchor, sigma2 + ANCHOR_VAR).sum())
    if state.T > 1:
        total += float(_gauss_logpdf(beta[:, 1:, :], beta[:, :-1, :], sigma2).sum())
    total += float(_gauss_logpdf(state.theta_hat, state.alpha_hat[None, :, :], a2).sum())
    alpha = state.alpha_hat
    total += float(_gauss_logpdf(alpha[0], state.alpha_anchor, delta2 + ANCHOR_VAR).sum())
    if state.T > 1:
        total += float(_gauss_logpdf(alpha[1:], alpha[:-1], delta2).sum())
    return total


def init_state(corpus: Corpus, hyper: Hyperparameters) -> VariationalState:
    """Starting point of the EM loop.

    Topic chains start at the corpus-wide add-one-smoothed log word
    frequencies plus seeded N(0, INIT_JITTER^2) jitter per topic, constant
    over slots; proportions and the profile start at zero.
    """
    V = len(corpus.vocabulary)
    T, L, Z = corpus.T, corpus.n_labels, hyper.Z
    totals = np.zeros(V)
    for doc in corpus.documents():
        totals[doc.counts.indices] += doc.counts.counts
    base = np.log((totals + 1.0) / (totals.sum() + V))
    rng = rng_from(hyper.seed, STREAM_INIT)
    anchor = base[None, :] + rng.normal(0.0, INIT_JITTER, size=(Z, V))
    beta_hat = np.repeat(anchor[:, None, :], T, axis=1)
    return VariationalState(
        beta_hat=beta_hat,
        beta_var=np.full((Z, T, V), hyper.sigma2 + ANCHOR_VAR),
        theta_hat=np.zeros((L, T, Z)),
        theta_var=np.full((L, T, Z), hyper.a2),
        alpha_hat=np.zeros((T, Z)),
        alpha_var=np.full((T, Z), hyper.delta2 + ANCHOR_VAR),
        beta_anchor=anchor,
        alpha_anchor=np.zeros(Z),
        labels=tuple(corpus.label_set),
    )


@dataclass(frozen=True)
class FitDiagnostics:
    iterations: int
    final_elbo: float
    converged: bool
    elbo_trace: tuple[float, ...]
    corpus_hash: str | None = None


@dataclass(frozen=True)
class FittedModel:
    """Point estimates of all chains plus the label-probability posterior."""

    hyper: Hyperparameters
    beta: TopicChains
    theta: LabelTopicChains
    alpha: MeanChain
    psi: PsiPosterior
    vocabulary: Vocabulary
    label_set: tuple[str, ...]
    label_freq: np.ndarray
    diagnostics: FitDiagnostics

    @property
    def T(self) -> int:
        return self.beta.T

    @property
    def Z(self) -> int:
        return self.beta.Z

    @property
    def L(self) -> int:
        return len(self.label_set)


def fit_dltm(
    corpus: Corpus,
    hyper: Hyperparameters,
    max_iter: int = 200,
    rel_tol: float = 1e-5,
    chains: int = 1000,
    level: float = 0.95,
    threads: int = 1,
    corpus_hash: str | None = None,
) -> FittedModel:
    """Fit all model parameters to a corpus.

    Alternates responsibility updates and chain re-estimation until the
    relative objective change drops below rel_tol or max_iter is reached,
    then samples the label-probability posterior. The first trace entry is
    the objective at the initial parameters (after the first responsibility
    update); one entry follows per completed iteration. Everything is
    reproducible from hyper.seed; `threads` caps E-step worker parallelism
    without affecting results.
    """
    if corpus.n_docs == 0:
        raise DataError("cannot fit an empty corpus")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    pseudo = reweight_pseudo_docs(corpus)
    packs = pack_pseudo_docs(pseudo, corpus.T, tuple(corpus.label_set))
    state = init_state(corpus, hyper)

    converged = False
    iterations = 0
    prev = None
    for it in range(1, max_iter + 1):
        _, n_hat, m_hat = e_step(packs, state, threads=threads)
        if it == 1:
            baseline = elbo(packs, state, hyper)
            if not np.isfinite(baseline):
                raise NumericalError("objective is non-finite at initialization")
            state.elbo_trace.append(baseline)
            prev = baseline
        m_step(n_hat, m_hat, hyper, state)
        value = elbo(packs, state, hyper)
        iterations = it
        if not np.isfinite(value):
            raise NumericalError(f"objective diverged (non-finite) at iteration {it}")
        state.elbo_trace.append(value)
        if abs(value - prev) <= rel_tol * max(abs(prev), 1e-12):
            converged = True
            break
        prev = value
    state.validate()

    psi = fit_label_probs(
        corpus, hyper.kappa, chains=chains, level=level,
        seed=derived_seed(hyper.seed, STREAM_PSI),
    )
    return FittedModel(
        hyper=hyper,
        beta=TopicChains(state.beta_hat.copy()),
        theta=LabelTopicChains(state.theta_hat.copy()),
        alpha=MeanChain(state.alpha_hat.copy()),
        psi=psi,
        vocabulary=corpus.vocabulary,
        label_set=tuple(corpus.label_set),
        label_freq=label_frequency(corpus),
        diagnostics=FitDiagnostics(
            iterations=iterations,
            final_elbo=state.elbo_trace[-1],
            converged=converged,
            elbo_trace=tuple(state.elbo_trace),
            corpus_hash=corpus_hash,
        ),
    )


def vocabulary_hash(vocab: Vocabulary) -> str:
    return sha256_text(canonical_json(list(vocab.terms)))


def save_model(model: FittedModel, path) -> None:
    """Write the versioned model bundle (canonical JSON, deterministic bytes)."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "hyper": {
            "Z": model.hyper.Z,
            "sigma2": model.hyper.sigma2,
            "delta2": model.hyper.delta2,
            "a2": model.hyper.a2,
            "kappa": model.hyper.kappa,
            "seed": int(model.hyper.seed),
        },
        "labels": list(model.label_set),
        "vocabulary": list(model.vocabulary.terms),
        "vocabulary_sha256": vocabulary_hash(model.vocabulary),
        "beta": model.beta.beta.tolist(),
        "theta": model.theta.theta.tolist(),
        "alpha": model.alpha.alpha.tolist(),
        "psi": {
            "mean": model.psi.mean.tolist(),
            "ci_low": model.psi.ci_low.tolist(),
            "ci_high": model.psi.ci_high.tolist(),
            "level": model.psi.level,
            "seed": model.psi.seed,
        },
        "label_freq": model.label_freq.tolist(),
        "diagnostics": {
            "iterations": model.diagnostics.iterations,
            "final_elbo": model.diagnostics.final_elbo,
            "converged": model.diagnostics.converged,
            "elbo_trace": list(model.diagnostics.elbo_trace),
            "corpus_hash": model.diagnostics.corpus_hash,
        },
    }
    atomic_write_text(path, canonical_json(payload) + "\n")


def load_model(path) -> FittedModel:
    """Read a model bundle; the psi posterior comes back summary-only (no samples)."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise DataError(f"{path} is not a model bundle")
    h = payload["hyper"]
    hyper = Hyperparameters(
        Z=int(h["Z"]), sigma2=h["sigma2"], delta2=h["delta2"], a2=h["a2"],
        kappa=h["kappa"], seed=int(h["seed"]),
    )
    p = payload["psi"]
    psi = PsiPosterior(
        samples=None,
        mean=np.array(p["mean"], dtype=np.float64),
        ci_low=np.array(p["ci_low"], dtype=np.float64),
        ci_high=np.array(p["ci_high"], dtype=np.float64),
        level=float(p["level"]),
        seed=int(p["seed"]),
    )
    d = payload["diagnostics"]
    return FittedModel(
        hyper=hyper,
        beta=TopicChains(np.array(payload["beta"], dtype=np.float64)),
        theta=LabelTopicChains(np.array(payload["theta"], dtype=np.float64)),
        alpha=MeanChain(np.array(payload["alpha"], dtype=np.float64)),
        psi=psi,
        vocabulary=Vocabulary.from_terms(payload["vocabulary"]),
        label_set=tuple(payload["labels"]),
        label_freq=np.array(payload["label_freq"], dtype=np.int64),
        diagnostics=FitDiagnostics(
            iterations=int(d["iterations"]),
            final_elbo=float(d["final_elbo"]),
            converged=bool(d["converged"]),
            elbo_trace=tuple(d["elbo_trace"]),
            corpus_hash=d.get("corpus_hash"),
        ),
    )
