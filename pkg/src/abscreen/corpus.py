"""Review/study corpus: records, loaders, joins and dataset statistics.

File formats (all line-delimited JSON, see :mod:`abscreen.jsonl`):

* review manifest — one object per review with the ``ReviewRecord`` fields;
  unknown fields are preserved on round-trip but otherwise ignored.
* study file — one object per study with the ``StudyRecord`` fields; the
  gold decision is spelled exactly ``"Included"`` or ``"Excluded"``.
* DOI list — plain text, one DOI per line, ``#`` comments allowed.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, JoinError, RecordValidationError
from .jsonl import dump_line, iter_records
from .tokenization import TokenCounter, sanitize


class ScreeningDecision(Enum):
    """Binary screening outcome, serialized as "Included"/"Excluded"."""

    INCLUDE = "Included"
    EXCLUDE = "Excluded"

    @classmethod
    def from_wire(cls, value: str) -> "ScreeningDecision":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"not a screening decision: {value!r}")

    def to_wire(self) -> str:
        return self.value


class Split(Enum):
    TRAIN = "train"
    TEST = "test"
    SUBSET = "subset"
    SAFETY_FIRST = "safety_first"
    IRRELEVANCY = "irrelevancy"


_REVIEW_REQUIRED = ("review_id", "doi", "topic", "title", "objectives_short", "criteria_short")
_REVIEW_OPTIONAL = (
    "objectives_long",
    "criteria_studies",
    "criteria_population",
    "criteria_intervention",
    "criteria_outcome",
)
_STUDY_REQUIRED = ("study_id", "review_id", "title", "abstract", "gold")
_STUDY_OPTIONAL = ("exclusion_reason", "population", "intervention", "outcome")

# Records that must be non-empty for prompt construction to be possible.
_REVIEW_NONEMPTY = ("review_id", "topic", "objectives_short", "criteria_short")
_STUDY_NONEMPTY = ("study_id", "review_id", "abstract")


@dataclass(frozen=True)
class ReviewRecord:
    """One systematic review: the screening context for its studies."""

    review_id: str
    doi: str
    topic: str
    title: str
    objectives_short: str
    criteria_short: str
    objectives_long: str | None = None
    criteria_studies: str | None = None
    criteria_population: str | None = None
    criteria_intervention: str | None = None
    criteria_outcome: str | None = None
    extras: Mapping[str, object] = field(default_factory=dict)

    def to_json_line(self) -> str:
        obj: dict[str, object] = {k: getattr(self, k) for k in _REVIEW_REQUIRED}
        for k in _REVIEW_OPTIONAL:
            v = getattr(self, k)
            if v is not None:
                obj[k] = v
        for k in sorted(self.extras):
            obj.setdefault(k, self.extras[k])
        return dump_line(obj)


@dataclass(frozen=True)
class StudyRecord:
    """One candidate study with its gold screening decision."""

    study_id: str
    review_id: str
    title: str
    abstract: str
    gold: ScreeningDecision
    exclusion_reason: str | None = None
    population: str | None = None
    intervention: str | None = None
    outcome: str | None = None
    extras: Mapping[str, object] = field(default_factory=dict)

    def to_json_line(self) -> str:
        obj: dict[str, object] = {
            "study_id": self.study_id,
            "review_id": self.review_id,
            "title": self.title,
            "abstract": self.abstract,
            "gold": self.gold.to_wire(),
        }
        for k in _STUDY_OPTIONAL:
            v = getattr(self, k)
            if v is not None:
                obj[k] = v
        for k in sorted(self.extras):
            obj.setdefault(k, self.extras[k])
        return dump_line(obj)


@dataclass(frozen=True)
class ScreeningInstance:
    """A (review, study) pair assigned to an evaluation split."""

    review: ReviewRecord
    study: StudyRecord
    split: Split


def _string_fields(obj: dict, required: Sequence[str], optional: Sequence[str],
                   nonempty: Sequence[str], *, path: str, line: int,
                   index: int) -> tuple[dict[str, str], dict[str, str], dict[str, object]]:
    loc = dict(path=path, line=line, index=index)
    req: dict[str, str] = {}
    for name in required:
        if name not in obj:
            raise RecordValidationError(f"missing required field {name!r}", name, **loc)
        value = obj[name]
        if not isinstance(value, str):
            raise RecordValidationError(f"field {name!r} must be a string", name, **loc)
        req[name] = value
    for name in nonempty:
        if not req[name].strip():
            raise RecordValidationError(f"field {name!r} must be non-empty", name, **loc)
    opt: dict[str, str] = {}
    for name in optional:
        value = obj.get(name)
        if value is None or value == "":
            continue  # empty optional fields are treated as absent
        if not isinstance(value, str):
            raise RecordValidationError(f"field {name!r} must be a string", name, **loc)
        opt[name] = value
    extras = {k: v for k, v in obj.items() if k not in required and k not in optional}
    return req, opt, extras


def load_manifest(path: str | Path) -> list[ReviewRecord]:
    """Load and validate a review manifest; rejects duplicate review ids."""
    records: list[ReviewRecord] = []
    seen: dict[str, int] = {}
    for index, (lineno, obj) in enumerate(iter_records(path)):
        req, opt, extras = _string_fields(
            obj, _REVIEW_REQUIRED, _REVIEW_OPTIONAL, _REVIEW_NONEMPTY,
            path=str(path), line=lineno, index=index)
        rid = req["review_id"]
        if rid in seen:
            raise RecordValidationError(
                f"duplicate review_id {rid!r} (first seen at line {seen[rid]})",
                "review_id", path=str(path), line=lineno, index=index)
        seen[rid] = lineno
        records.append(ReviewRecord(**req, **opt, extras=extras))
    return records


def load_studies(path: str | Path) -> list[StudyRecord]:
    """Load and validate a study file.

    Enforced invariants: non-empty abstract; ``exclusion_reason`` only on
    excluded studies; population/intervention/outcome only on included ones.
    """
    records: list[StudyRecord] = []
    seen: dict[str, int] = {}
    for index, (lineno, obj) in enumerate(iter_records(path)):
        req, opt, extras = _string_fields(
            obj, _STUDY_REQUIRED, _STUDY_OPTIONAL, _STUDY_NONEMPTY,
            path=str(path), line=lineno, index=index)
        loc = dict(path=str(path), line=lineno, index=index)
        try:
            gold = ScreeningDecision.from_wire(req["gold"])
        except ValueError:
            raise RecordValidationError(
                f"gold must be 'Included' or 'Excluded', got {req['gold']!r}",
                "gold", **loc) from None
        if gold is ScreeningDecision.INCLUDE and "exclusion_reason" in opt:
            raise RecordValidationError(
                "exclusion_reason present on an included study",
                "exclusion_reason", **loc)
        if gold is ScreeningDecision.EXCLUDE:
            for name in ("population", "intervention", "outcome"):
                if name in opt:
                    raise RecordValidationError(
                        f"{name} present on an excluded study", name, **loc)
        sid = req["study_id"]
        if sid in seen:
            raise RecordValidationError(
                f"duplicate study_id {sid!r} (first seen at line {seen[sid]})",
                "study_id", **loc)
        seen[sid] = lineno
        del req["gold"]
        records.append(StudyRecord(**req, gold=gold, **opt, extras=extras))
    return records


def load_doi_list(path: str | Path) -> list[str]:
    """Read the released DOI list: one DOI per line, ``#`` comments allowed."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"DOI list does not exist: {path}")
    dois: list[str] = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        dois.append(line)
    return dois


def doi_gaps(reviews: Sequence[ReviewRecord], dois: Sequence[str]) -> list[str]:
    """DOIs from the released list that the manifest does not cover."""
    have = {r.doi for r in reviews}
    return [d for d in dois if d not in have]


def join_instances(reviews: Sequence[ReviewRecord], studies: Sequence[StudyRecord],
                   split: Split) -> list[ScreeningInstance]:
    """One instance per study, in study order; unresolved reviews are fatal."""
    by_id = {r.review_id: r for r in reviews}
    missing = sorted({s.review_id for s in studies if s.review_id not in by_id})
    if missing:
        raise JoinError(missing)
    return [ScreeningInstance(by_id[s.review_id], s, split) for s in studies]


@dataclass(frozen=True)
class FieldTokenStats:
    """Token-length statistics for one text field (over non-absent values)."""

    count: int
    total: int
    minimum: int
    maximum: int

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else math.nan


@dataclass(frozen=True)
class LabelCounts:
    include: int = 0
    exclude: int = 0

    @property
    def total(self) -> int:
        return self.include + self.exclude


# Task names mirror abscreen.promptgen.TaskKind values; string keys keep the
# corpus layer independent of prompt construction.
TASK_NAMES = ("include_exclude", "population", "intervention", "outcome", "exclusion_reason")

REVIEW_STAT_FIELDS = (
    "review_title",
    "objectives_short",
    "objectives_long",
    "criteria_short",
    "criteria_studies",
    "criteria_population",
    "criteria_intervention",
    "criteria_outcome",
)
STUDY_STAT_FIELDS = ("study_title", "abstract")


@dataclass(frozen=True)
class SplitStats:
    """Per-split inclusion/exclusion counts, per-task sample counts and
    per-field token-length stats over the distinct reviews/studies seen."""

    labels: dict[Split, LabelCounts]
    tasks: dict[Split, dict[str, int]]
    fields: dict[str, FieldTokenStats]


def _field_text(instance: ScreeningInstance, name: str) -> str | None:
    if name == "review_title":
        return instance.review.title or None
    if name == "study_title":
        return instance.study.title or None
    if name == "abstract":
        return instance.study.abstract
    return getattr(instance.review, name)


def compute_split_stats(instances: Sequence[ScreeningInstance],
                        counter: TokenCounter) -> SplitStats:
    """Count samples per split/label/task and token lengths per field.

    Review fields are measured once per distinct review, study fields once
    per distinct study; text is colon-stripped before counting, matching
    prompt construction. Empty input yields zero counts everywhere.
    """
    labels: dict[Split, dict[ScreeningDecision, int]] = {}
    tasks: dict[Split, dict[str, int]] = {}
    for inst in instances:
        lab = labels.setdefault(inst.split, {d: 0 for d in ScreeningDecision})
        lab[inst.study.gold] += 1
        tsk = tasks.setdefault(inst.split, {name: 0 for name in TASK_NAMES})
        tsk["include_exclude"] += 1
        for name in ("population", "intervention", "outcome", "exclusion_reason"):
            if getattr(inst.study, name) is not None:
                tsk[name] += 1

    field_values: dict[str, list[int]] = {}
    seen_reviews: set[str] = set()
    seen_studies: set[str] = set()
    for inst in instances:
        if inst.review.review_id not in seen_reviews:
            seen_reviews.add(inst.review.review_id)
            for name in REVIEW_STAT_FIELDS:
                text = _field_text(inst, name)
                if text is not None:
                    field_values.setdefault(name, []).append(counter.count(sanitize(text)))
        if inst.study.study_id not in seen_studies:
            seen_studies.add(inst.study.study_id)
            for name in STUDY_STAT_FIELDS:
                text = _field_text(inst, name)
                if text is not None:
                    field_values.setdefault(name, []).append(counter.count(sanitize(text)))

    fields = {
        name: FieldTokenStats(len(vals), sum(vals), min(vals), max(vals))
        for name, vals in field_values.items()
    }
    return SplitStats(
        labels={
            split: LabelCounts(lab[ScreeningDecision.INCLUDE], lab[ScreeningDecision.EXCLUDE])
            for split, lab in labels.items()
        },
        tasks=tasks,
        fields=fields,
    )


def topic_distribution(instances: Iterable[ScreeningInstance]) -> dict[str, int]:
    """Instance counts per review topic; values sum to the input size."""
    return dict(Counter(inst.review.topic for inst in instances))
