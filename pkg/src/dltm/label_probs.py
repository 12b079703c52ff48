"""Label-probability inference: sequential conjugate Dirichlet sampling.

The label factor of the likelihood is multinomial in the per-slot label
incidence counts, so with a Dirichlet prior the per-slot posterior is the
prior plus the counts. Each of S independent chains walks forward through
the slots, sampling the slot's probabilities from that posterior and
passing kappa times the sample on as the next slot's prior. Posterior
means and equal-tailed credible intervals are summarized across chains.

Dirichlet draws are taken as independent standard-Gamma variables
normalized by their sum, so ports agree distributionally (not bitwise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import DataError

_MIN_CONCENTRATION = 1e-300


@dataclass(frozen=True)
class PsiPosterior:
    """Sampled label-probability chains with per-slot summaries.

    samples has shape [S, T, L]; mean, ci_low, ci_high have shape [T, L].
    Intervals are equal-tailed at the stored level.
    """

    samples: np.ndarray | None
    mean: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    level: float
    seed: int

    def __post_init__(self):
        if np.any(np.abs(self.mean.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("posterior mean rows must sum to 1 within 1e-9")
        if np.any(self.ci_low > self.mean + 1e-12) or np.any(self.ci_high < self.mean - 1e-12):
            raise ValueError("credible bounds must bracket the mean")

    @property
    def T(self) -> int:
        return self.mean.shape[0]

    @property
    def L(self) -> int:
        return self.mean.shape[1]


def dirichlet_posterior(prior: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Posterior concentration after observing multinomial counts: prior + counts."""
    prior = np.asarray(prior, dtype=np.float64)
    counts = np.asarray(counts)
    if prior.shape != counts.shape:
        raise ValueError("prior and counts must have the same shape")
    if np.any(prior <= 0):
        raise ValueError("prior concentrations must be strictly positive")
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    return prior + counts


def label_counts(corpus: Corpus, t: int) -> np.ndarray:
    """Label incidence counts for slot t (1-based): one per (document, label) pair."""
    if not 1 <= t <= corpus.T:
        raise ValueError(f"slot {t} outside 1..{corpus.T}")
    index = corpus.label_index()
    counts = np.zeros(corpus.n_labels, dtype=np.int64)
    for doc in corpus.slots[t - 1]:
        for label in doc.labels:
            counts[index[label]] += 1
    return counts


def credible_interval(samples, level: float) -> tuple[float, float]:
    """Equal-tailed empirical interval: linearly interpolated quantiles at
    (1 - level)/2 and 1 - (1 - level)/2."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("credible_interval requires at least one sample")
    if not 0 <= level < 1:
        raise ValueError("level must be in [0, 1)")
    lo = (1.0 - level) / 2.0
    low, high = np.quantile(arr, [lo, 1.0 - lo], method="linear")
    return float(low), float(high)


def _sample_dirichlet(rng: np.random.Generator, conc: np.ndarray) -> np.ndarray:
    draws = rng.standard_gamma(np.maximum(conc, _MIN_CONCENTRATION))
    total = draws.sum()
    if total <= 0:
        out = conc / conc.sum()
    else:
        out = draws / total
    # Renormalize so downstream simplex checks at 1e-12 always hold.
    return out / out.sum()


def fit_label_probs(
    corpus: Corpus,
    kappa: float,
    chains: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> PsiPosterior:
    """Sample S forward chains of per-slot label probabilities.

    Chain s starts from the kappa * uniform prior; at each slot it samples
    from the conjugate posterior (prior + incidence counts) and propagates
    kappa times the sample as the next prior. Slots without documents leave
    the prior unchanged. Each chain's generator is derived from
    (seed, chain index), so results are reproducible and chain-parallelism
    safe.
    """
    if corpus.T < 1:
        raise DataError("corpus has no time slots")
    if chains < 1:
        raise ValueError("chains must be >= 1")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    if kappa <= 0:
        raise ValueError("kappa must be strictly positive")

    T, L = corpus.T, corpus.n_labels
    counts = np.stack([label_counts(corpus, t) for t in range(1, T + 1)])

    samples = np.empty((chains, T, L))
    for s in range(chains):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), s)))
        prior = np.full(L, kappa / L)
        for t in range(T):
            posterior = dirichlet_posterior(prior, counts[t])
            psi_t = _sample_dirichlet(rng, posterior)
            samples[s, t] = psi_t
            # Floor keeps the propagated prior strictly positive even if a
            # component's sample underflowed to zero.
            prior = np.maximum(kappa * psi_t, 1e-12)

    mean = samples.mean(axis=0)
    mean /= mean.sum(axis=1, keepdims=True)
    lo = (1.0 - level) / 2.0
    ci_low, ci_high = np.quantile(samples, [lo, 1.0 - lo], axis=0, method="linear")
    return PsiPosterior(
        samples=samples, mean=mean, ci_low=ci_low, ci_high=ci_high,
        level=level, seed=int(seed),
    )
