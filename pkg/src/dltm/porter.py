"""Classic Porter stemmer.

Implements the original 1980 algorithm: five suffix-stripping steps driven
by the measure m of the stem (the number of vowel-consonant sequences).
Within each step the longest matching suffix is selected first; if its
condition fails, the step performs no change (no fallthrough to shorter
suffixes). Words shorter than three letters are returned unchanged.

Input is expected to be lowercase ASCII letters; anything else is returned
unchanged.
"""

from __future__ import annotations

_VOWELS = frozenset("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of VC sequences in [C](VC)^m[V]."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        if _is_consonant(stem, i):
            if prev_vowel:
                m += 1
            prev_vowel = False
        else:
            prev_vowel = True
    return m


def _contains_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    """*o condition: ends consonant-vowel-consonant, final consonant not w, x, y."""
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def _rule_match(word: str, rules) -> str:
    """Apply the longest-suffix rule whose suffix matches; no fallthrough.

    `rules` is a list of (suffix, replacement, condition) with condition a
    predicate on the stem or None. Rules must be pre-sorted so that for any
    word the first suffix match is the longest possible one.
    """
    for suffix, repl, cond in rules:
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            if cond is None or cond(stem):
                return stem + repl
            return word
    return word


def _step1a(word: str) -> str:
    return _rule_match(
        word,
        [
            ("sses", "ss", None),
            ("ies", "i", None),
            ("ss", "ss", None),
            ("s", "", None),
        ],
    )


def _step1b(word: str) -> str:
    if word.endswith("eed"):
        stem = word[:-3]
        return stem + "ee" if _measure(stem) > 0 else word
    deleted = None
    if word.endswith("ed") and _contains_vowel(word[:-2]):
        deleted = word[:-2]
    elif word.endswith("ing") and _contains_vowel(word[:-3]):
        deleted = word[:-3]
    if deleted is None:
        return word
    word = deleted
    if word.endswith(("at", "bl", "iz")):
        return word + "e"
    if _ends_double_consonant(word) and word[-1] not in "lsz":
        return word[:-1]
    if _measure(word) == 1 and _ends_cvc(word):
        return word + "e"
    return word


def _step1c(word: str) -> str:
    if word.endswith("y") and _contains_vowel(word[:-1]):
        return word[:-1] + "i"
    return word


_M_POSITIVE = lambda stem: _measure(stem) > 0  # noqa: E731
_M_GT1 = lambda stem: _measure(stem) > 1  # noqa: E731

_STEP2_RULES = [
    (s, r, _M_POSITIVE)
    for s, r in [
        ("ational", "ate"),
        ("ization", "ize"),
        ("iveness", "ive"),
        ("fulness", "ful"),
        ("ousness", "ous"),
        ("tional", "tion"),
        ("biliti", "ble"),
        ("entli", "ent"),
        ("ousli", "ous"),
        ("ation", "ate"),
        ("alism", "al"),
        ("aliti", "al"),
        ("iviti", "ive"),
        ("enci", "ence"),
        ("anci", "ance"),
        ("izer", "ize"),
        ("abli", "able"),
        ("alli", "al"),
        ("ator", "ate"),
        ("eli", "e"),
    ]
]

_STEP3_RULES = [
    (s, r, _M_POSITIVE)
    for s, r in [
        ("icate", "ic"),
        ("ative", ""),
        ("alize", "al"),
        ("iciti", "ic"),
        ("ical", "ic"),
        ("ful", ""),
        ("ness", ""),
    ]
]

_STEP4_RULES = [
    ("ement", "", _M_GT1),
    ("ance", "", _M_GT1),
    ("ence", "", _M_GT1),
    ("able", "", _M_GT1),
    ("ible", "", _M_GT1),
    ("ment", "", _M_GT1),
    ("ant", "", _M_GT1),
    ("ent", "", _M_GT1),
    ("ion", "", lambda stem: _M_GT1(stem) and stem[-1:] in ("s", "t")),
    ("ism", "", _M_GT1),
    ("ate", "", _M_GT1),
    ("iti", "", _M_GT1),
    ("ous", "", _M_GT1),
    ("ive", "", _M_GT1),
    ("ize", "", _M_GT1),
    ("al", "", _M_GT1),
    ("er", "", _M_GT1),
    ("ic", "", _M_GT1),
    ("ou", "", _M_GT1),
]


def _step5a(word: str) -> str:
    if word.endswith("e"):
        stem = word[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            return stem
    return word


def _step5b(word: str) -> str:
    if _measure(word) > 1 and _ends_double_consonant(word) and word.endswith("l"):
        return word[:-1]
    return word


def porter_stem(word: str) -> str:
    """Stem one lowercase word with the classic Porter algorithm."""
    if len(word) < 3 or not word.isascii() or not word.isalpha():
        return word
    word = _step1a(word)
    word = _step1b(word)
    word = _step1c(word)
    word = _rule_match(word, _STEP2_RULES)
    word = _rule_match(word, _STEP3_RULES)
    word = _rule_match(word, _STEP4_RULES)
    word = _step5a(word)
    word = _step5b(word)
    return word


def stem_fixed_point(word: str, max_rounds: int = 5) -> str:
    """Apply the stemmer until the output stops changing.

    Porter is not idempotent on all words (e.g. a step-4 result ending in
    's' loses it on a second pass). The preprocessing pipeline promises
    idempotence, so stems are driven to a fixed point.
    """
    for _ in range(max_rounds):
        nxt = porter_stem(word)
        if nxt == word:
            return word
        word = nxt
    return word
