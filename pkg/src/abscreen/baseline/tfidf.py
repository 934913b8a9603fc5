"""Per-review TF-IDF vectorization.

Weighting is raw term frequency times smoothed inverse document frequency,
idf(t) = ln((1 + N) / (1 + df(t))) + 1, with the final vector length
normalized. A fresh vectorizer is fitted per review (and per training fold)
so no vocabulary leaks across folds.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import FitError
from ._validation import ParamsMixin, check_is_fitted


@dataclass(frozen=True)
class SparseVector:
    """Sorted (index, weight) pairs; indices strictly increasing."""

    indices: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.weights):
            raise ValueError("indices and weights must have equal length")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("indices must be strictly increasing")
        if not all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    def __len__(self) -> int:
        return len(self.indices)

    def to_dense(self, n_features: int) -> np.ndarray:
        dense = np.zeros(n_features)
        if self.indices:
            dense[list(self.indices)] = self.weights
        return dense


def _ngrams(tokens: Sequence[str], ngram_range: tuple[int, int]) -> Iterable[str]:
    lo, hi = ngram_range
    for n in range(lo, hi + 1):
        if n == 1:
            yield from tokens
        else:
            for i in range(len(tokens) - n + 1):
                yield " ".join(tokens[i:i + n])


class TfidfVectorizer(ParamsMixin):
    """Fit a vocabulary over token documents; transform to tf-idf vectors.

    Fitted state: ``vocabulary_`` (term -> dense index, 0..V-1),
    ``document_frequency_``, ``idf_`` and ``n_docs_``. Unigrams by default;
    set ``ngram_range=(1, 2)`` to add bigrams.
    """

    def __init__(self, ngram_range: tuple[int, int] = (1, 1)):
        self.ngram_range = ngram_range

    def fit(self, documents: Sequence[Sequence[str]], y=None) -> "TfidfVectorizer":
        if len(documents) == 0:
            raise FitError("cannot fit a vocabulary on an empty corpus")
        df: Counter[str] = Counter()
        for tokens in documents:
            df.update(set(_ngrams(tokens, self.ngram_range)))
        self.vocabulary_ = {term: i for i, term in enumerate(sorted(df))}
        self.n_docs_ = len(documents)
        self.document_frequency_ = np.array(
            [df[t] for t in sorted(df)], dtype=float)
        self.idf_ = np.log((1.0 + self.n_docs_) / (1.0 + self.document_frequency_)) + 1.0
        return self

    @property
    def n_features_(self) -> int:
        check_is_fitted(self, "vocabulary_")
        return len(self.vocabulary_)

    def transform_one(self, tokens: Sequence[str]) -> SparseVector:
        """tf times idf, length-normalized; terms outside the vocabulary are
        dropped. All-unseen input yields the empty vector."""
        check_is_fitted(self, "vocabulary_")
        counts: Counter[int] = Counter()
        for term in _ngrams(tokens, self.ngram_range):
            idx = self.vocabulary_.get(term)
            if idx is not None:
                counts[idx] += 1
        if not counts:
            return SparseVector((), ())
        indices = tuple(sorted(counts))
        raw = np.array([counts[i] * self.idf_[i] for i in indices])
        norm = float(np.linalg.norm(raw))
        return SparseVector(indices, tuple(raw / norm))

    def transform(self, documents: Sequence[Sequence[str]]) -> list[SparseVector]:
        return [self.transform_one(tokens) for tokens in documents]

    def fit_transform(self, documents: Sequence[Sequence[str]], y=None) -> list[SparseVector]:
        return self.fit(documents).transform(documents)


def vectors_to_matrix(vectors: Sequence[SparseVector], n_features: int) -> np.ndarray:
    matrix = np.zeros((len(vectors), n_features))
    for row, vec in enumerate(vectors):
        if vec.indices:
            matrix[row, list(vec.indices)] = vec.weights
    return matrix
