"""Every reported evaluation quantity.

Degenerate denominators surface as ``None`` ("undefined" in reports), never
as 0.0 or 1.0 — a screening run that predicts a single class must be visible
as such.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import math

from .corpus import ScreeningDecision
from .errors import CorrelationUndefinedError, EvaluationError
from .inference import PredictionRecord, PredictionStatus
from .jsonl import iter_records

AMBIGUOUS_POLICIES = ("error", "include", "exclude")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int
    ambiguous: int = 0
    errored: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn + self.ambiguous + self.errored


def confusion_from_labels(predictions: Sequence[ScreeningDecision],
                          golds: Sequence[ScreeningDecision],
                          positive: ScreeningDecision = ScreeningDecision.INCLUDE,
                          ) -> ConfusionCounts:
    """Counts for fully parsed predictions (no ambiguity buckets)."""
    if len(predictions) != len(golds):
        raise EvaluationError(
            f"{len(predictions)} predictions vs {len(golds)} golds")
    tp = fp = fn = tn = 0
    for pred, gold in zip(predictions, golds):
        if pred is positive:
            if gold is positive:
                tp += 1
            else:
                fp += 1
        else:
            if gold is positive:
                fn += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def confusion(predictions: Sequence[PredictionRecord],
              golds: Sequence[tuple[str, ScreeningDecision]],
              positive: ScreeningDecision = ScreeningDecision.INCLUDE,
              ambiguous_policy: str = "error") -> ConfusionCounts:
    """Id-aligned counts over raw prediction records.

    ``ambiguous_policy`` decides what happens to unparseable responses:
    kept in their own bucket ("error") or coerced to a label. Endpoint
    failures always stay in the errored bucket.
    """
    if ambiguous_policy not in AMBIGUOUS_POLICIES:
        raise EvaluationError(f"unknown ambiguous policy {ambiguous_policy!r}")
    if len(predictions) != len(golds):
        raise EvaluationError(
            f"{len(predictions)} predictions vs {len(golds)} golds")
    tp = fp = fn = tn = ambiguous = errored = 0
    coerce = {
        "include": ScreeningDecision.INCLUDE,
        "exclude": ScreeningDecision.EXCLUDE,
    }.get(ambiguous_policy)
    for pred, (gold_id, gold) in zip(predictions, golds):
        if pred.bundle_id != gold_id:
            raise EvaluationError(
                f"prediction/gold id mismatch: {pred.bundle_id!r} vs {gold_id!r}")
        if pred.status is PredictionStatus.ERROR:
            errored += 1
            continue
        if pred.status is PredictionStatus.AMBIGUOUS:
            if coerce is None:
                ambiguous += 1
                continue
            decision = coerce
        else:
            decision = pred.decision
        if decision is positive:
            if gold is positive:
                tp += 1
            else:
                fp += 1
        else:
            if gold is positive:
                fn += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fp, fn, tn, ambiguous, errored)


@dataclass(frozen=True)
class ClassMetrics:
    """None marks an undefined value (zero denominator)."""

    precision: float | None
    recall: float | None
    accuracy: float | None
    f1: float | None


def class_metrics(counts: ConfusionCounts) -> ClassMetrics:
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else None
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else None
    accuracy = (counts.tp + counts.tn) / counts.total if counts.total else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ClassMetrics(precision, recall, accuracy, f1)


@dataclass(frozen=True)
class TopicMetrics:
    include_f1: float | None
    exclude_f1: float | None
    accuracy: float | None
    support: int


@dataclass(frozen=True)
class TopicBreakdown:
    topics: dict[str, TopicMetrics]

    @property
    def total_support(self) -> int:
        return sum(t.support for t in self.topics.values())


def per_topic(predictions: Sequence[PredictionRecord],
              golds: Sequence[tuple[str, ScreeningDecision]],
              topics: Sequence[str],
              ambiguous_policy: str = "error") -> TopicBreakdown:
    """Include- and exclude-class F1 plus accuracy per topic.

    A topic where the model never predicts one of the classes gets an
    undefined F1 for that class (the "absent bar" case).
    """
    if not (len(predictions) == len(golds) == len(topics)):
        raise EvaluationError("predictions, golds and topics must align")
    grouped: dict[str, list[int]] = {}
    for i, topic in enumerate(topics):
        grouped.setdefault(topic, []).append(i)
    out: dict[str, TopicMetrics] = {}
    for topic, idxs in grouped.items():
        preds = [predictions[i] for i in idxs]
        gold = [golds[i] for i in idxs]
        inc = class_metrics(confusion(preds, gold, ScreeningDecision.INCLUDE,
                                      ambiguous_policy))
        exc = class_metrics(confusion(preds, gold, ScreeningDecision.EXCLUDE,
                                      ambiguous_policy))
        out[topic] = TopicMetrics(inc.f1, exc.f1, inc.accuracy, len(idxs))
    return TopicBreakdown(out)


def irrelevancy_accuracy(predictions: Sequence[PredictionRecord]) -> float:
    """Fraction of a guaranteed-irrelevant set the model excluded.

    Unparseable or failed responses count against the score: they did not
    exclude the study.
    """
    if not predictions:
        raise EvaluationError("empty prediction set")
    excluded = sum(1 for p in predictions if p.decision is ScreeningDecision.EXCLUDE)
    return excluded / len(predictions)


def apply_artifact_penalty(stars: int, has_artifact: bool) -> int:
    """Knock one star off responses with generation artifacts, floored at 0."""
    if not 0 <= stars <= 5:
        raise EvaluationError(f"stars out of range: {stars}")
    return max(stars - 1, 0) if has_artifact else stars


@dataclass(frozen=True)
class RatingRow:
    """One rater's score for one generated exclusion reason."""

    sample_id: str
    system: str
    rater: str
    stars: int
    artifact: bool

    @property
    def penalized(self) -> int:
        return apply_artifact_penalty(self.stars, self.artifact)


@dataclass(frozen=True)
class RatingSummary:
    mean: float
    histogram: dict[int, int]
    mean_by_rater: dict[str, float]
    n_rows: int


def rating_summary(rows: Sequence[RatingRow]) -> dict[str, RatingSummary]:
    """Per-system mean star rating over both raters' penalized scores, plus
    a 0-5 histogram and per-rater means."""
    by_system: dict[str, list[RatingRow]] = {}
    for row in rows:
        by_system.setdefault(row.system, []).append(row)
    out: dict[str, RatingSummary] = {}
    for system, system_rows in by_system.items():
        scores = [r.penalized for r in system_rows]
        histogram = {s: 0 for s in range(6)}
        for s in scores:
            histogram[s] += 1
        by_rater: dict[str, list[int]] = {}
        for r in system_rows:
            by_rater.setdefault(r.rater, []).append(r.penalized)
        out[system] = RatingSummary(
            mean=sum(scores) / len(scores),
            histogram=histogram,
            mean_by_rater={k: sum(v) / len(v) for k, v in sorted(by_rater.items())},
            n_rows=len(system_rows),
        )
    return out


def load_ratings(path) -> list[RatingRow]:
    rows = []
    for _, obj in iter_records(path):
        rows.append(RatingRow(
            sample_id=str(obj["sample_id"]),
            system=str(obj["system"]),
            rater=str(obj["rater"]),
            stars=int(obj["stars"]),
            artifact=bool(obj["artifact_flag"]),
        ))
    return rows


def pearson_r(a: Sequence[float], b: Sequence[float]) -> float:
    """Product-moment correlation; undefined for constant input."""
    if len(a) != len(b):
        raise EvaluationError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise EvaluationError("correlation needs at least two points")
    n = len(a)
    mean_a = sum(a) / n
    mean_b = sum(b) / n
    da = [x - mean_a for x in a]
    db = [y - mean_b for y in b]
    var_a = sum(x * x for x in da)
    var_b = sum(y * y for y in db)
    if var_a == 0 or var_b == 0:
        raise CorrelationUndefinedError("correlation undefined for constant input")
    r = sum(x * y for x, y in zip(da, db)) / math.sqrt(var_a * var_b)
    return max(-1.0, min(1.0, r))
