"""Text normalization for the lexical retrieval path.

Provides the shared tokenizer and a rule-based suffix-stripping stemmer
(the classic Porter algorithm), combined into a pluggable, deterministic
:class:`Normalizer`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)

_VOWELS = "aeiou"


def tokenize(text: str) -> list[str]:
    """Split on whitespace and punctuation: tokens are runs of word characters."""
    return _TOKEN_RE.findall(text)


def _is_cons(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        # y is a vowel when it follows a consonant
        return True if i == 0 else not _is_cons(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of vowel-to-consonant transitions, the m of [C](VC){m}[V]."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        if _is_cons(stem, i):
            if prev_vowel:
                m += 1
            prev_vowel = False
        else:
            prev_vowel = True
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_cons(stem, i) for i in range(len(stem)))


def _ends_double_cons(stem: str) -> bool:
    return (
        len(stem) >= 2
        and stem[-1] == stem[-2]
        and _is_cons(stem, len(stem) - 1)
    )


def _ends_cvc(stem: str) -> bool:
    if len(stem) < 3:
        return False
    return (
        _is_cons(stem, len(stem) - 3)
        and not _is_cons(stem, len(stem) - 2)
        and _is_cons(stem, len(stem) - 1)
        and stem[-1] not in "wxy"
    )


def _apply_rules(word: str, rules) -> str:
    """Apply the single rule with the longest matching suffix.

    Once a suffix matches, no other rule in the step is considered, even
    if the matched rule's condition fails.
    """
    for suffix, replacement, condition in rules:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if condition is None or condition(stem):
                return stem + replacement
            return word
    return word


def _m_positive(stem: str) -> bool:
    return _measure(stem) > 0


def _m_gt_one(stem: str) -> bool:
    return _measure(stem) > 1


# Rule tables are ordered longest-suffix-first so the longest match wins.
_STEP2_RULES = [
    ("ational", "ate", _m_positive),
    ("ization", "ize", _m_positive),
    ("iveness", "ive", _m_positive),
    ("fulness", "ful", _m_positive),
    ("ousness", "ous", _m_positive),
    ("tional", "tion", _m_positive),
    ("biliti", "ble", _m_positive),
    ("ation", "ate", _m_positive),
    ("alism", "al", _m_positive),
    ("aliti", "al", _m_positive),
    ("iviti", "ive", _m_positive),
    ("ousli", "ous", _m_positive),
    ("entli", "ent", _m_positive),
    ("enci", "ence", _m_positive),
    ("anci", "ance", _m_positive),
    ("izer", "ize", _m_positive),
    ("abli", "able", _m_positive),
    ("alli", "al", _m_positive),
    ("ator", "ate", _m_positive),
    ("eli", "e", _m_positive),
]

_STEP3_RULES = [
    ("icate", "ic", _m_positive),
    ("ative", "", _m_positive),
    ("alize", "al", _m_positive),
    ("iciti", "ic", _m_positive),
    ("ical", "ic", _m_positive),
    ("ness", "", _m_positive),
    ("ful", "", _m_positive),
]

_STEP4_RULES = [
    ("ement", "", _m_gt_one),
    ("ance", "", _m_gt_one),
    ("ence", "", _m_gt_one),
    ("able", "", _m_gt_one),
    ("ible", "", _m_gt_one),
    ("ment", "", _m_gt_one),
    ("ant", "", _m_gt_one),
    ("ent", "", _m_gt_one),
    ("ion", "", lambda stem: _m_gt_one(stem) and stem[-1:] in ("s", "t")),
    ("ism", "", _m_gt_one),
    ("ate", "", _m_gt_one),
    ("iti", "", _m_gt_one),
    ("ous", "", _m_gt_one),
    ("ive", "", _m_gt_one),
    ("ize", "", _m_gt_one),
    ("al", "", _m_gt_one),
    ("er", "", _m_gt_one),
    ("ic", "", _m_gt_one),
    ("ou", "", _m_gt_one),
]


def _step1a(word: str) -> str:
    return _apply_rules(
        word,
        [("sses", "ss", None), ("ies", "i", None), ("ss", "ss", None), ("s", "", None)],
    )


def _step1b(word: str) -> str:
    if word.endswith("eed"):
        stem = word[:-3]
        if _measure(stem) > 0:
            return stem + "ee"
        return word
    for suffix in ("ed", "ing"):
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if not _has_vowel(stem):
                return word
            # cleanup applies only when an ed/ing suffix was removed
            if stem.endswith(("at", "bl", "iz")):
                return stem + "e"
            if _ends_double_cons(stem) and stem[-1] not in "lsz":
                return stem[:-1]
            if _measure(stem) == 1 and _ends_cvc(stem):
                return stem + "e"
            return stem
    return word


def _step1c(word: str) -> str:
    if word.endswith("y") and _has_vowel(word[:-1]):
        return word[:-1] + "i"
    return word


def _step5a(word: str) -> str:
    if word.endswith("e"):
        stem = word[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            return stem
    return word


def _step5b(word: str) -> str:
    if word.endswith("l") and _ends_double_cons(word) and _measure(word) > 1:
        return word[:-1]
    return word


def porter_stem(word: str) -> str:
    """Stem a single lowercase word with the classic Porter suffix rules.

    Deterministic and total; words of length <= 2 are returned unchanged.
    """
    if len(word) <= 2:
        return word
    word = _step1a(word)
    word = _step1b(word)
    word = _step1c(word)
    word = _apply_rules(word, _STEP2_RULES)
    word = _apply_rules(word, _STEP3_RULES)
    word = _apply_rules(word, _STEP4_RULES)
    word = _step5a(word)
    word = _step5b(word)
    return word


@dataclass(frozen=True)
class Normalizer:
    """Deterministic token-normalization pipeline for the retrieval copy.

    The default pipeline lowercases and applies the Porter stemmer; pass a
    different ``stem`` callable to slot in another stemmer or a lemmatizer.
    The callable must itself be deterministic.
    """

    lowercase: bool = True
    stem: Callable[[str], str] | None = field(default=porter_stem)
    name: str = "lowercase+porter"

    def tokens(self, text: str) -> list[str]:
        out = tokenize(text)
        if self.lowercase:
            out = [t.lower() for t in out]
        if self.stem is not None:
            out = [self.stem(t) for t in out]
        return out

    def text(self, text: str) -> str:
        return " ".join(self.tokens(text))

    @classmethod
    def identity(cls) -> "Normalizer":
        """Tokenize-and-rejoin only; no case folding, no stemming."""
        return cls(lowercase=False, stem=None, name="identity")


def build_normalizer(spec: dict | None) -> Normalizer:
    """Build a Normalizer from a config mapping ({lowercase, stemmer})."""
    if not spec:
        return Normalizer()
    lowercase = bool(spec.get("lowercase", True))
    stemmer = spec.get("stemmer", "porter")
    if stemmer == "porter":
        stem = porter_stem
    elif stemmer in (None, "none"):
        stem = None
    else:
        raise ValueError(f"unknown stemmer {stemmer!r}")
    name = ("lowercase+" if lowercase else "") + (stemmer or "none")
    return Normalizer(lowercase=lowercase, stem=stem, name=name)
