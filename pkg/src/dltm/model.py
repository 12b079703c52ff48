"""Model parameter types, the natural-to-mean mapping, and likelihood evaluation.

Natural parameters are unconstrained real vectors; the mapping to the
probability simplex is the softmax (chosen because Gaussian-drifted chains
go negative, where a literal ratio of coordinates leaves the simplex; the
ratio form remains available behind a compatibility flag).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .corpus import Corpus
from .errors import NumericalError


@dataclass(frozen=True)
class Hyperparameters:
    """Model dimensions and drift variances.

    sigma2 drives the per-topic word-distribution drift, delta2 the drift of
    the mean topic profile, a2 the per-label scatter around that profile,
    and kappa scales the Dirichlet concentration of the label-probability
    chain. All variances must be strictly positive.
    """

    Z: int
    sigma2: float = 0.05
    delta2: float = 0.05
    a2: float = 0.05
    kappa: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.Z < 1:
            raise ValueError("Z must be >= 1")
        for name in ("sigma2", "delta2", "a2", "kappa"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")


def _finite_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TopicChains:
    """Per-topic natural-parameter chains over the vocabulary, shape [Z, T, V]."""

    beta: np.ndarray

    def __post_init__(self):
        arr = _finite_array(self.beta, "beta")
        if arr.ndim != 3:
            raise ValueError("beta must have shape [Z, T, V]")
        object.__setattr__(self, "beta", arr)

    @property
    def Z(self) -> int:
        return self.beta.shape[0]

    @property
    def T(self) -> int:
        return self.beta.shape[1]

    @property
    def V(self) -> int:
        return self.beta.shape[2]


@dataclass(frozen=True)
class MeanChain:
    """Mean topic-profile chain, shape [T, Z]."""

    alpha: np.ndarray

    def __post_init__(self):
        arr = _finite_array(self.alpha, "alpha")
        if arr.ndim != 2:
            raise ValueError("alpha must have shape [T, Z]")
        object.__setattr__(self, "alpha", arr)


@dataclass(frozen=True)
class LabelTopicChains:
    """Per-label topic-proportion naturals, shape [L, T, Z]."""

    theta: np.ndarray

    def __post_init__(self):
        arr = _finite_array(self.theta, "theta")
        if arr.ndim != 3:
            raise ValueError("theta must have shape [L, T, Z]")
        object.__setattr__(self, "theta", arr)

    @property
    def L(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class LabelProbSeries:
    """Label probability vectors per slot, shape [T, L]; rows sum to 1."""

    psi: np.ndarray

    def __post_init__(self):
        arr = _finite_array(self.psi, "psi")
        if arr.ndim != 2:
            raise ValueError("psi must have shape [T, L]")
        if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("each psi row must be a probability vector (sum 1 within 1e-12)")
        object.__setattr__(self, "psi", arr)


def pi_mean_map(natural, ratio: bool = False) -> np.ndarray:
    """Map natural parameters to mean (probability) parameters.

    The default is the overflow-safe softmax, invariant under adding a
    constant to all entries. With ratio=True the literal coordinate ratio
    x / sum(x) is used instead; it rejects non-positive entries because they
    leave the simplex.
    """
    x = np.asarray(natural, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty natural-parameter vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("natural parameters must be finite")
    if ratio:
        if np.any(x <= 0):
            raise ValueError("ratio mapping requires strictly positive entries")
        return x / x.sum(axis=-1, keepdims=True)
    shifted = x - x.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def log_softmax(x: np.ndarray) -> np.ndarray:
    """log of :func:`pi_mean_map` along the last axis, computed stably."""
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def label_topic_word_dist(theta_lt, beta_t) -> np.ndarray:
    """Word distribution of one label at one slot: topic word distributions
    mixed by the label's topic proportions.

    theta_lt is a Z-vector of naturals, beta_t a [Z, V] natural matrix.
    """
    theta_lt = np.asarray(theta_lt, dtype=np.float64)
    beta_t = np.asarray(beta_t, dtype=np.float64)
    if theta_lt.ndim != 1 or beta_t.ndim != 2 or theta_lt.shape[0] != beta_t.shape[0]:
        raise ValueError(
            f"dimension mismatch: theta has {theta_lt.shape}, beta has {beta_t.shape}"
        )
    weights = pi_mean_map(theta_lt)
    return weights @ pi_mean_map(beta_t)


def doc_word_distribution(doc_labels, theta: LabelTopicChains, beta: TopicChains, t: int,
                          label_index: dict[str, int]) -> np.ndarray:
    """Word distribution of a document: the unweighted average over its labels.

    `t` is the 1-based time slot; `label_index` maps label ids to rows of theta.
    """
    labels = list(doc_labels)
    if not labels:
        raise ValueError("document label list is empty")
    rows = [label_index[l] for l in labels]
    beta_t = beta.beta[:, t - 1, :]
    dists = [label_topic_word_dist(theta.theta[r, t - 1, :], beta_t) for r in rows]
    return np.mean(dists, axis=0)


@dataclass(frozen=True)
class LogLikelihood:
    """Split log likelihood: label factor, word factor, and their sum.

    has_zero_prob flags a positive count matched with a zero probability;
    the affected parts are -inf rather than an exception.
    """

    logL1: float
    logL2: float
    total: float
    has_zero_prob: bool = False

    def __iter__(self):
        return iter((self.logL1, self.logL2, self.total))


def _log_multinomial(counts: np.ndarray, probs: np.ndarray, total: int) -> tuple[float, bool]:
    """log Mult(counts | total; probs) including the multinomial coefficient."""
    coeff = gammaln(total + 1) - gammaln(counts + 1).sum()
    mask = counts > 0
    if np.any(probs[mask] == 0):
        return float("-inf"), True
    return float(coeff + (counts[mask] * np.log(probs[mask])).sum()), False


def log_likelihood(corpus: Corpus, beta: TopicChains, theta: LabelTopicChains,
                   psi: LabelProbSeries, label_index: dict[str, int] | None = None) -> LogLikelihood:
    """Full-data log likelihood under given chains, split into the label part
    (multinomial label draws under psi) and the word part (bag-of-words under
    each document's label-averaged word distribution). Multinomial
    coefficients are included, so values match a textbook evaluation.
    """
    if label_index is None:
        label_index = corpus.label_index()
    Z, T, V = beta.beta.shape
    if T < corpus.T or theta.theta.shape[1] < corpus.T or psi.psi.shape[0] < corpus.T:
        raise ValueError("parameter chains are shorter than the corpus time span")
    if V != len(corpus.vocabulary) or psi.psi.shape[1] != corpus.n_labels:
        raise ValueError("parameter dimensions do not match the corpus")

    logL1 = 0.0
    logL2 = 0.0
    zero_prob = False
    for t in range(1, corpus.T + 1):
        psi_t = psi.psi[t - 1]
        for doc in corpus.slots[t - 1]:
            rows = np.array([label_index[l] for l in doc.labels])
            label_counts = np.bincount(rows, minlength=corpus.n_labels)
            part, flag = _log_multinomial(label_counts, psi_t, doc.n_labels)
            logL1 += part
            zero_prob |= flag

            phi = doc_word_distribution(doc.labels, theta, beta, t, label_index)
            dense = doc.counts.to_dense(V)
            part, flag = _log_multinomial(dense, phi, doc.token_total)
            logL2 += part
            zero_prob |= flag
    return LogLikelihood(logL1=logL1, logL2=logL2, total=logL1 + logL2, has_zero_prob=zero_prob)


def check_finite(value: float, context: str) -> float:
    if not np.isfinite(value):
        raise NumericalError(f"non-finite value in {context}")
    return value
