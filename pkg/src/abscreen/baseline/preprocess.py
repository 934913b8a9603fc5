"""Abstract text preprocessing for the per-review classifier.

Lowercase, keep alphabetic tokens, drop stopwords, then reduce inflected
forms with a small in-repo suffix-stripping rule list. The rule list is
deliberately self-contained (no external lexicon) so preprocessing is
byte-reproducible anywhere.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ._validation import ParamsMixin

_TOKEN_RE = re.compile(r"[a-z]+")

# (suffix, replacement, minimum stem length, undouble trailing consonant)
# First matching rule wins; a rule applies only when enough stem remains.
_STEM_RULES: tuple[tuple[str, str, int, bool], ...] = (
    ("sses", "ss", 2, False),
    ("ies", "y", 2, False),
    ("ied", "y", 2, False),
    ("ing", "", 3, True),
    ("ed", "", 3, True),
    ("ness", "", 3, False),
    ("ly", "", 3, False),
    ("s", "", 3, False),
)

_VOWELS = frozenset("aeiou")


def stem(word: str) -> str:
    """Deterministic suffix stripping, e.g. running -> run, studies -> study."""
    for suffix, replacement, min_stem, undouble in _STEM_RULES:
        if not word.endswith(suffix):
            continue
        stem_len = len(word) - len(suffix)
        if stem_len < min_stem:
            continue
        if suffix == "s" and word.endswith(("ss", "us", "is")):
            continue
        out = word[:stem_len] + replacement
        if undouble and len(out) >= 2 and out[-1] == out[-2] and out[-1] not in _VOWELS:
            out = out[:-1]
        return out
    return word


def load_stopwords(path: str | Path) -> frozenset[str]:
    """One word per line; lowercased and deduplicated."""
    words = Path(path).read_text(encoding="utf-8").split()
    return frozenset(w.lower() for w in words)


def default_stopwords() -> frozenset[str]:
    data = resources.files("abscreen.baseline").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w.lower() for w in data.split())


@dataclass(frozen=True)
class PreprocessConfig:
    lowercase: bool = True
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    stemmer: str = "suffix"  # "suffix" or "none"

    def __post_init__(self) -> None:
        if self.stemmer not in ("suffix", "none"):
            raise ValueError(f"unknown stemmer {self.stemmer!r}")


def preprocess_text(text: str, config: PreprocessConfig | None = None) -> list[str]:
    """Text to a token list per the configured pipeline."""
    config = config or PreprocessConfig()
    if config.lowercase:
        text = text.lower()
    tokens = [t for t in _TOKEN_RE.findall(text) if t not in config.stopwords]
    if config.stemmer == "suffix":
        tokens = [stem(t) for t in tokens]
    return tokens


class TextPreprocessor(ParamsMixin):
    """Stateless transformer wrapper so preprocessing slots into pipelines."""

    def __init__(self, config: PreprocessConfig | None = None):
        self.config = config or PreprocessConfig()

    def fit(self, X, y=None):
        return self

    def transform(self, X: list[str]) -> list[list[str]]:
        return [preprocess_text(text, self.config) for text in X]

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)
