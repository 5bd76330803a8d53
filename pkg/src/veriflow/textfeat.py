"""Textual features: TF-IDF word 1-4-grams, lexicon proportions, speaker one-hot.

TF-IDF models must be fitted on training-fold texts only; vectorization of
unseen text simply ignores out-of-vocabulary n-grams.  Lexicon features are
per-claim token proportions over the categories of a LIWC-style dictionary
(literal words plus trailing-* prefix patterns).  The real LIWC 2007
dictionary is proprietary; a compatible-format stub ships with the package
for tests and synthetic runs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import Claim
from .errors import DataError

_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)

NGRAM_RANGE = (1, 4)


def tokenize(text: str) -> list[str]:
    """Lower-case, strip punctuation, split on whitespace."""
    return _PUNCT.sub("", text.lower()).split()


def _ngrams(tokens: list[str], lo: int = NGRAM_RANGE[0], hi: int = NGRAM_RANGE[1]):
    for n in range(lo, hi + 1):
        for i in range(len(tokens) - n + 1):
            yield " ".join(tokens[i : i + n])


@dataclass
class TfidfModel:
    """Fitted vocabulary and smoothed idf weights for word 1-4-grams."""

    vocabulary: dict[str, int]
    idf: np.ndarray
    ngram_range: tuple[int, int] = NGRAM_RANGE

    @property
    def dim(self) -> int:
        return len(self.vocabulary)


def fit_tfidf(texts: list[str]) -> TfidfModel:
    """Fit vocabulary + idf on a training corpus.

    idf_t = ln((1 + N) / (1 + df_t)) + 1 (smoothed, always > 0).  Vocabulary
    indices are dense and assigned in sorted n-gram order, so fitting is
    deterministic regardless of input order.
    """
    if not texts:
        raise DataError("cannot fit TF-IDF on an empty corpus")
    df: dict[str, int] = {}
    for text in texts:
        for g in set(_ngrams(tokenize(text))):
            df[g] = df.get(g, 0) + 1
    if not df:
        raise DataError("cannot fit TF-IDF: no n-grams in corpus")
    vocabulary = {g: i for i, g in enumerate(sorted(df))}
    n = len(texts)
    idf = np.empty(len(vocabulary))
    for g, i in vocabulary.items():
        idf[i] = math.log((1 + n) / (1 + df[g])) + 1.0
    return TfidfModel(vocabulary=vocabulary, idf=idf)


def tfidf_vector(model: TfidfModel, text: str) -> np.ndarray:
    """tf * idf per in-vocabulary n-gram, L2-normalized (zero vector stays zero)."""
    vec = np.zeros(model.dim)
    for g in _ngrams(tokenize(text)):
        col = model.vocabulary.get(g)
        if col is not None:
            vec[col] += model.idf[col]
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


# ---------------------------------------------------------------------------
# Lexicon categories


@dataclass
class Lexicon:
    """Ordered categories, each a set of literal words and prefix patterns."""

    categories: list[str]
    literals: dict[str, frozenset[str]]
    prefixes: dict[str, tuple[str, ...]]

    @property
    def dim(self) -> int:
        return len(self.categories)

    def matches(self, category: str, token: str) -> bool:
        if token in self.literals[category]:
            return True
        return any(token.startswith(p) for p in self.prefixes[category])


def load_lexicon(path: str | Path) -> Lexicon:
    """Read a TSV lexicon: optional "# categories=N" line, header, then rows.

    Patterns are lower-cased; '*' is only legal as a trailing wildcard.  When
    a category count is declared it must match the number of distinct
    categories in the body.
    """
    declared: int | None = None
    categories: list[str] = []
    literals: dict[str, set[str]] = {}
    prefixes: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            m = re.search(r"categories\s*=\s*(\d+)", line)
            if m:
                declared = int(m.group(1))
            continue
        if line.strip():
            body.append(line)
    if not body or body[0].split("\t") != ["category", "pattern"]:
        raise DataError(f"{path}: expected header 'category<TAB>pattern'")
    for lineno, line in enumerate(body[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path} line {lineno}: expected 2 tab-separated fields")
        cat, pattern = parts[0], parts[1].strip().lower()
        if "*" in pattern[:-1]:
            raise DataError(f"{path} line {lineno}: '*' only allowed as trailing wildcard")
        if cat not in literals:
            categories.append(cat)
            literals[cat] = set()
            prefixes[cat] = []
        if pattern.endswith("*"):
            prefixes[cat].append(pattern[:-1])
        else:
            literals[cat].add(pattern)
    if declared is not None and declared != len(categories):
        raise DataError(f"{path}: header declares {declared} categories, body has {len(categories)}")
    return Lexicon(
        categories=categories,
        literals={c: frozenset(s) for c, s in literals.items()},
        prefixes={c: tuple(p) for c, p in prefixes.items()},
    )


def stub_lexicon_path() -> Path:
    """Path of the packaged 64-category stub lexicon."""
    return Path(resources.files("veriflow").joinpath("data/lexicon_stub.tsv"))


def lexicon_proportions(lexicon: Lexicon, text: str) -> np.ndarray:
    """Per-category fraction of tokens matching any category pattern.

    A token may count toward multiple categories; empty text gives zeros.
    """
    tokens = tokenize(text)
    vec = np.zeros(lexicon.dim)
    if not tokens:
        return vec
    for i, cat in enumerate(lexicon.categories):
        vec[i] = sum(1 for t in tokens if lexicon.matches(cat, t)) / len(tokens)
    return vec


# ---------------------------------------------------------------------------
# Speaker metadata


@dataclass(frozen=True)
class SpeakerEncoder:
    """One-hot over an ordered speaker roster; unknown speakers encode to zeros."""

    roster: tuple[str, ...]

    @property
    def dim(self) -> int:
        return len(self.roster)

    def encode(self, speaker: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        try:
            vec[self.roster.index(speaker)] = 1.0
        except ValueError:
            pass
        return vec


def liwc_speaker_view(lexicon: Lexicon, enc: SpeakerEncoder, claim: Claim) -> np.ndarray:
    """Concatenate [lexicon proportions ; speaker one-hot] for one claim."""
    return np.concatenate([lexicon_proportions(lexicon, claim.text), enc.encode(claim.speaker)])
