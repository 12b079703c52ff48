"""Text preprocessing pipeline: normalization, tokenization, stopwords, stemming.

The pipeline is idempotent on its own output: every emitted token is a
lowercase ASCII-letter string that is a stemmer fixed point and passes all
filters, so re-processing the joined tokens reproduces the list exactly.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field

from .porter import stem_fixed_point


@dataclass(frozen=True)
class PreprocessConfig:
    """Settings for :func:`preprocess_text`.

    stopwords is applied to raw tokens before stemming (and re-checked on
    stems so the pipeline stays idempotent); extra_stoplist is applied after
    stemming, which is where hand-curated lists such as character names
    belong. Both sets must be lowercase.
    """

    stopwords: frozenset[str] = field(default_factory=frozenset)
    extra_stoplist: frozenset[str] = field(default_factory=frozenset)
    min_token_length: int = 3
    stemmer: str = "porter"

    def __post_init__(self):
        if self.min_token_length < 1:
            raise ValueError("min_token_length must be >= 1")
        if self.stemmer not in ("porter", "none"):
            raise ValueError(f"unknown stemmer {self.stemmer!r}")
        for name in ("stopwords", "extra_stoplist"):
            words = getattr(self, name)
            if not isinstance(words, frozenset):
                object.__setattr__(self, name, frozenset(words))
            if any(w != w.lower() for w in getattr(self, name)):
                raise ValueError(f"{name} entries must be lowercase")


def _candidate_tokens(raw: str) -> list[str]:
    """Split NFKD-folded, lowercased text into letter-only candidate tokens.

    Combining marks are deleted (so accented letters fold to their ASCII
    base), every other non-letter character acts as a separator, and any
    token still containing a non-ASCII letter is dropped entirely.
    """
    folded = unicodedata.normalize("NFKD", raw).lower()
    chars = []
    for ch in folded:
        if ch.isalpha():
            chars.append(ch)
        elif unicodedata.combining(ch):
            continue
        else:
            chars.append(" ")
    tokens = "".join(chars).split()
    return [t for t in tokens if t.isascii()]


def preprocess_text(raw: str, config: PreprocessConfig) -> list[str]:
    """Turn raw text into a clean token list, preserving token order.

    Digits, punctuation, symbols and whitespace runs separate tokens;
    words with non-ASCII letters are removed; stopwords are filtered before
    stemming and stems are filtered against stopwords, the extra stoplist
    and the minimum token length.
    """
    out = []
    for token in _candidate_tokens(raw):
        if token in config.stopwords:
            continue
        if config.stemmer == "porter":
            token = stem_fixed_point(token)
        if len(token) < config.min_token_length:
            continue
        if token in config.stopwords or token in config.extra_stoplist:
            continue
        out.append(token)
    return out


def load_stoplist(path) -> frozenset[str]:
    """Read one term per line, lowercased; blank lines and '#' comments ignored."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip().lower()
            if line and not line.startswith("#"):
                words.add(line)
    return frozenset(words)
