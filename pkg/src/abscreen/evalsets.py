"""Evaluation-set construction: review subset, safety-first mapping and the
irrelevancy set.

The irrelevancy sampler uses Python's Mersenne Twister (`random.Random`)
seeded explicitly and consumed in sorted (anchor, source) order, so the set
is reproducible from the seed alone.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .corpus import ScreeningDecision, ScreeningInstance, Split
from .errors import EvaluationError, RecordValidationError, SamplingError
from .jsonl import iter_records

DEFAULT_SUBSET_THRESHOLD = 100
DEFAULT_PER_PAIR = 5


class SafetyLabel(Enum):
    """Three-valued annotator label for the safety-first set."""

    INCLUDE = "Include"
    EXCLUDE = "Exclude"
    INSUFFICIENT_INFORMATION = "Insufficient Information"

    @classmethod
    def from_wire(cls, value: str) -> "SafetyLabel":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"not a safety label: {value!r}")


@dataclass(frozen=True)
class SafetyAnnotation:
    instance_id: str
    annotator_label: SafetyLabel
    original_gold: ScreeningDecision


def load_annotations(path) -> list[SafetyAnnotation]:
    """Line-delimited {instance_id, annotator_label, original_gold} records."""
    out = []
    for lineno, obj in iter_records(path):
        try:
            label = SafetyLabel.from_wire(obj["annotator_label"])
            gold = ScreeningDecision.from_wire(obj["original_gold"])
        except (KeyError, ValueError) as exc:
            raise RecordValidationError(str(exc), "annotator_label",
                                        path=str(path), line=lineno) from exc
        out.append(SafetyAnnotation(str(obj["instance_id"]), label, gold))
    return out


@dataclass(frozen=True)
class SubsetSpec:
    """Reviews with enough test abstracts for per-review training."""

    threshold: int
    review_ids: tuple[str, ...]


def select_review_subset(test_instances: Sequence[ScreeningInstance],
                         threshold: int = DEFAULT_SUBSET_THRESHOLD) -> SubsetSpec:
    """Reviews whose test-split instance count strictly exceeds *threshold*,
    in deterministic review-id order."""
    counts: dict[str, int] = {}
    for inst in test_instances:
        counts[inst.review.review_id] = counts.get(inst.review.review_id, 0) + 1
    chosen = tuple(sorted(rid for rid, n in counts.items() if n > threshold))
    return SubsetSpec(threshold, chosen)


def map_safety_label(label: SafetyLabel) -> ScreeningDecision:
    """Cautious collapse to two classes: anything short of a clear exclusion
    moves forward to full-text screening."""
    if label is SafetyLabel.EXCLUDE:
        return ScreeningDecision.EXCLUDE
    return ScreeningDecision.INCLUDE


@dataclass(frozen=True)
class SafetySet:
    instances: list[ScreeningInstance]
    n_include: int
    n_exclude: int


def build_safety_set(annotations: Sequence[SafetyAnnotation],
                     test_instances: Sequence[ScreeningInstance]) -> SafetySet:
    """Re-gold the annotated test instances with the mapped annotator label."""
    by_id = {inst.study.study_id: inst for inst in test_instances}
    out: list[ScreeningInstance] = []
    n_include = n_exclude = 0
    for ann in annotations:
        inst = by_id.get(ann.instance_id)
        if inst is None:
            raise EvaluationError(
                f"annotation references unknown test instance {ann.instance_id!r}")
        mapped = map_safety_label(ann.annotator_label)
        if mapped is ScreeningDecision.INCLUDE:
            n_include += 1
        else:
            n_exclude += 1
        study = inst.study
        regolded = type(study)(
            study_id=study.study_id,
            review_id=study.review_id,
            title=study.title,
            abstract=study.abstract,
            gold=mapped,
            extras=study.extras,
        )
        out.append(ScreeningInstance(inst.review, regolded, Split.SAFETY_FIRST))
    return SafetySet(out, n_include, n_exclude)


@dataclass(frozen=True)
class Disagreement:
    instance_id: str
    annotator_label: SafetyLabel
    original_gold: ScreeningDecision


@dataclass(frozen=True)
class DisagreementReport:
    by_label: dict[SafetyLabel, list[Disagreement]]

    @property
    def total(self) -> int:
        return sum(len(v) for v in self.by_label.values())


def audit_disagreements(annotations: Sequence[SafetyAnnotation]) -> DisagreementReport:
    """Annotations whose mapped label contradicts the original reviewer gold,
    partitioned by the raw annotator label."""
    by_label: dict[SafetyLabel, list[Disagreement]] = {}
    for ann in annotations:
        if map_safety_label(ann.annotator_label) is not ann.original_gold:
            by_label.setdefault(ann.annotator_label, []).append(
                Disagreement(ann.instance_id, ann.annotator_label, ann.original_gold))
    return DisagreementReport(by_label)


@dataclass(frozen=True)
class IrrelevancyPair:
    """A study from one review screened against another review's criteria."""

    anchor_review_id: str
    source_review_id: str
    study_id: str

    @property
    def gold(self) -> ScreeningDecision:
        return ScreeningDecision.EXCLUDE


def build_irrelevancy_set(test_instances: Sequence[ScreeningInstance],
                          subset: SubsetSpec,
                          per_pair: int = DEFAULT_PER_PAIR,
                          seed: int = 0) -> list[IrrelevancyPair]:
    """For every ordered (anchor, other) pair of subset reviews, sample
    ``per_pair`` distinct studies from the other review without replacement.

    Output size is R*(R-1)*per_pair; no pair ever draws from its own anchor;
    identical seeds give identical output.
    """
    if len(subset.review_ids) < 2:
        raise SamplingError("irrelevancy set needs at least two subset reviews")
    studies_by_review: dict[str, list[str]] = {rid: [] for rid in subset.review_ids}
    for inst in test_instances:
        rid = inst.review.review_id
        if rid in studies_by_review:
            studies_by_review[rid].append(inst.study.study_id)
    for rid, studies in studies_by_review.items():
        if len(studies) < per_pair:
            raise SamplingError(
                f"review {rid!r} has only {len(studies)} studies, need {per_pair}")
    rng = random.Random(seed)
    pairs: list[IrrelevancyPair] = []
    for anchor in sorted(subset.review_ids):
        for source in sorted(subset.review_ids):
            if source == anchor:
                continue
            for study_id in rng.sample(studies_by_review[source], per_pair):
                pairs.append(IrrelevancyPair(anchor, source, study_id))
    return pairs


def irrelevancy_pair_to_record(pair: IrrelevancyPair) -> dict:
    return {
        "anchor_review_id": pair.anchor_review_id,
        "source_review_id": pair.source_review_id,
        "study_id": pair.study_id,
        "gold": pair.gold.to_wire(),
    }


def load_irrelevancy_pairs(path) -> list[IrrelevancyPair]:
    pairs = []
    for lineno, obj in iter_records(path):
        if obj.get("gold", "Excluded") != "Excluded":
            raise RecordValidationError("irrelevancy gold must be 'Excluded'",
                                        "gold", path=str(path), line=lineno)
        pairs.append(IrrelevancyPair(
            anchor_review_id=str(obj["anchor_review_id"]),
            source_review_id=str(obj["source_review_id"]),
            study_id=str(obj["study_id"]),
        ))
    return pairs


def irrelevancy_instances(pairs: Sequence[IrrelevancyPair],
                          test_instances: Sequence[ScreeningInstance],
                          ) -> list[ScreeningInstance]:
    """Join pairs back to records: the anchor review's context with the
    source study's abstract, gold forced to Exclude."""
    reviews = {inst.review.review_id: inst.review for inst in test_instances}
    studies = {inst.study.study_id: inst.study for inst in test_instances}
    out = []
    for pair in pairs:
        if pair.anchor_review_id not in reviews:
            raise EvaluationError(f"unknown anchor review {pair.anchor_review_id!r}")
        if pair.study_id not in studies:
            raise EvaluationError(f"unknown study {pair.study_id!r}")
        study = studies[pair.study_id]
        regolded = type(study)(
            study_id=study.study_id,
            review_id=pair.anchor_review_id,
            title=study.title,
            abstract=study.abstract,
            gold=ScreeningDecision.EXCLUDE,
            extras=study.extras,
        )
        out.append(ScreeningInstance(reviews[pair.anchor_review_id], regolded,
                                     Split.IRRELEVANCY))
    return out
