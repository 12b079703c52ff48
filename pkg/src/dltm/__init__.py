"""Dynamic labeled topic model: simulation, two-stage inference, reporting.

Documents carry labels and live in discrete time slots. Label popularity
follows a Dirichlet chain inferred by sequential conjugate sampling; topics
and per-label topic mixtures follow Gaussian random walks on natural
parameters, inferred by variational EM with per-chain Kalman smoothing.
"""

from .corpus import (
    Corpus,
    Document,
    SparseCounts,
    Vocabulary,
    bag_of_words,
    build_vocabulary,
    label_frequency,
    load_corpus,
    read_corpus,
    save_corpus,
)
from .errors import DataError, DltmError, NumericalError
from .kalman import kalman_smooth_chain
from .label_probs import (
    PsiPosterior,
    credible_interval,
    dirichlet_posterior,
    fit_label_probs,
    label_counts,
)
from .model import (
    Hyperparameters,
    LabelProbSeries,
    LabelTopicChains,
    LogLikelihood,
    MeanChain,
    TopicChains,
    doc_word_distribution,
    label_topic_word_dist,
    log_likelihood,
    pi_mean_map,
)
from .preprocess import PreprocessConfig, preprocess_text
from .reporting import (
    TopicScoreTable,
    corpus_stats,
    export_report,
    match_topics,
    top_topics,
    top_words,
    topic_scores,
)
from .simulate import SimDims, SimInit, SimulationTruth, load_truth, save_truth, simulate_corpus
from .variational import (
    FitDiagnostics,
    FittedModel,
    PseudoDoc,
    VariationalState,
    e_step,
    elbo,
    fit_dltm,
    load_model,
    m_step,
    reweight_pseudo_docs,
    save_model,
)

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "DataError",
    "DltmError",
    "Document",
    "FitDiagnostics",
    "FittedModel",
    "Hyperparameters",
    "LabelProbSeries",
    "LabelTopicChains",
    "LogLikelihood",
    "MeanChain",
    "NumericalError",
    "PreprocessConfig",
    "PseudoDoc",
    "PsiPosterior",
    "SimDims",
    "SimInit",
    "SimulationTruth",
    "SparseCounts",
    "TopicChains",
    "TopicScoreTable",
    "VariationalState",
    "Vocabulary",
    "bag_of_words",
    "build_vocabulary",
    "corpus_stats",
    "credible_interval",
    "dirichlet_posterior",
    "doc_word_distribution",
    "e_step",
    "elbo",
    "export_report",
    "fit_dltm",
    "fit_label_probs",
    "kalman_smooth_chain",
    "label_counts",
    "label_frequency",
    "label_topic_word_dist",
    "load_corpus",
    "load_model",
    "load_truth",
    "log_likelihood",
    "m_step",
    "match_topics",
    "pi_mean_map",
    "preprocess_text",
    "read_corpus",
    "reweight_pseudo_docs",
    "save_corpus",
    "save_model",
    "save_truth",
    "simulate_corpus",
    "top_topics",
    "top_words",
    "topic_scores",
]
