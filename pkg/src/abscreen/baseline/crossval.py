"""Per-review k-fold cross-validation of the TF-IDF + logistic regression
baseline. The vectorizer is refitted inside every training fold so the
held-out fold contributes nothing to the vocabulary."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from ..corpus import ScreeningDecision, ScreeningInstance
from ..errors import DegenerateTrainingError, FitError
from ..metrics import ClassMetrics, class_metrics, confusion_from_labels
from .logreg import LogisticRegression
from .preprocess import PreprocessConfig, preprocess_text
from .tfidf import TfidfVectorizer


@dataclass(frozen=True)
class FoldAssignment:
    """Instance id -> fold index; folds are disjoint, cover every id, and
    their sizes differ by at most one."""

    mapping: dict[str, int]
    k: int

    def fold_of(self, instance_id: str) -> int:
        return self.mapping[instance_id]

    def members(self, fold: int) -> list[str]:
        return [i for i, f in self.mapping.items() if f == fold]


def make_folds(ids: Sequence[str], k: int, seed: int) -> FoldAssignment:
    """Seeded shuffle then round-robin deal; deterministic for a given
    (ids order, k, seed)."""
    if k < 2:
        raise FitError("k-fold cross validation needs k >= 2")
    if len(ids) < k:
        raise FitError(f"cannot split {len(ids)} instances into {k} folds")
    if len(set(ids)) != len(ids):
        raise FitError("fold assignment requires unique instance ids")
    shuffled = list(ids)
    random.Random(seed).shuffle(shuffled)
    return FoldAssignment({iid: pos % k for pos, iid in enumerate(shuffled)}, k)


@dataclass(frozen=True)
class FoldOutcome:
    fold: int
    metrics: ClassMetrics | None
    n_train: int
    n_test: int
    skipped: bool = False
    reason: str | None = None


@dataclass(frozen=True)
class CrossvalResult:
    metrics: ClassMetrics
    folds: list[FoldOutcome]

    @property
    def skipped_folds(self) -> list[int]:
        return [f.fold for f in self.folds if f.skipped]


def _mean_defined(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


def crossval_review(instances: Sequence[ScreeningInstance], k: int = 5,
                    lam: float = 1.0, seed: int = 0,
                    config: PreprocessConfig | None = None,
                    ngram_range: tuple[int, int] = (1, 1),
                    max_iters: int = 500, tol: float = 1e-6) -> CrossvalResult:
    """Train/evaluate one review's classifier across k folds.

    Metrics (include-class precision/recall, accuracy, F1) are averaged
    uniformly over evaluated folds. A fold whose training part lacks a class
    is skipped and reported, not silently dropped.
    """
    config = config or PreprocessConfig()
    golds = [inst.study.gold for inst in instances]
    if len({g for g in golds}) < 2:
        raise DegenerateTrainingError("review does not contain both classes")
    ids = [inst.study.study_id for inst in instances]
    assignment = make_folds(ids, k, seed)
    token_docs = [preprocess_text(inst.study.abstract, config) for inst in instances]

    outcomes: list[FoldOutcome] = []
    for fold in range(k):
        train_idx = [i for i, iid in enumerate(ids) if assignment.fold_of(iid) != fold]
        test_idx = [i for i, iid in enumerate(ids) if assignment.fold_of(iid) == fold]
        train_golds = [golds[i] for i in train_idx]
        if len(set(train_golds)) < 2:
            outcomes.append(FoldOutcome(fold, None, len(train_idx), len(test_idx),
                                        skipped=True,
                                        reason="training fold contains a single class"))
            continue
        vectorizer = TfidfVectorizer(ngram_range=ngram_range)
        X_train = vectorizer.fit_transform([token_docs[i] for i in train_idx])
        X_test = vectorizer.transform([token_docs[i] for i in test_idx])
        model = LogisticRegression(lam=lam, max_iters=max_iters, tol=tol, seed=seed)
        model.fit(X_train, train_golds, n_features=vectorizer.n_features_)
        predicted = [
            ScreeningDecision.INCLUDE if p == 1 else ScreeningDecision.EXCLUDE
            for p in model.predict(X_test)
        ]
        counts = confusion_from_labels(predicted, [golds[i] for i in test_idx])
        outcomes.append(FoldOutcome(fold, class_metrics(counts),
                                    len(train_idx), len(test_idx)))

    evaluated = [o.metrics for o in outcomes if o.metrics is not None]
    if not evaluated:
        raise DegenerateTrainingError("every fold was skipped; nothing to average")
    averaged = ClassMetrics(
        precision=_mean_defined([m.precision for m in evaluated]),
        recall=_mean_defined([m.recall for m in evaluated]),
        accuracy=_mean_defined([m.accuracy for m in evaluated]),
        f1=_mean_defined([m.f1 for m in evaluated]),
    )
    return CrossvalResult(averaged, outcomes)
