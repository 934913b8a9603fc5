"""Instruction prompt construction under a token budget.

A screening prompt combines three review/study sections (objectives,
selection criteria, abstract). When the assembled prompt would exceed the
model's maximum input length, the longest section is truncated, preferably
at a sentence boundary inside its final third, and the check repeats until
the prompt fits. Rendering then produces either instruction-tuning triples
(instruction / input / expected output) or single-message chat prompts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence
from urllib.parse import quote, unquote

from .corpus import ReviewRecord, ScreeningDecision, ScreeningInstance, StudyRecord
from .errors import BudgetError, TemplateError, TruncationFloorError
from .jsonl import iter_records
from .tokenization import TokenCounter, find_sentence_breaks, sanitize

__all__ = [
    "DEFAULT_MAX_TOKENS",
    "INSTRUCTIONS",
    "PromptBundle",
    "Section",
    "SectionSet",
    "TaskKind",
    "TokenBudget",
    "alpaca_prompt",
    "applicable_tasks",
    "build_dataset",
    "bundle_to_record",
    "fit_to_budget",
    "load_bundles",
    "make_budget",
    "render_alpaca",
    "render_chat_exclusion",
    "render_chat_screening",
    "sanitize",
    "truncate_section",
]

DEFAULT_MAX_TOKENS = 2048


class TaskKind(Enum):
    """The five instruction-tuning tasks built from a screening corpus."""

    INCLUDE_EXCLUDE = "include_exclude"
    POPULATION = "population"
    INTERVENTION = "intervention"
    OUTCOME = "outcome"
    EXCLUSION_REASON = "exclusion_reason"


INSTRUCTIONS: dict[TaskKind, str] = {
    TaskKind.INCLUDE_EXCLUDE: (
        "Given the abstract, selection criteria and objectives should the "
        "study be included or excluded?"
    ),
    TaskKind.POPULATION: (
        "Given the abstract, selection criteria and objectives describe the "
        "population of the study."
    ),
    TaskKind.INTERVENTION: (
        "Given the abstract, selection criteria and objectives describe the "
        "intervention of the study."
    ),
    TaskKind.OUTCOME: (
        "Given the abstract, selection criteria and objectives describe the "
        "outcome of the study."
    ),
    TaskKind.EXCLUSION_REASON: (
        "Given the abstract, selection criteria and objectives explain why "
        "the study was excluded."
    ),
}

_ALPACA_PREAMBLE = (
    "Below is an instruction that describes a task, paired with an input "
    "that provides further context. Write a response that appropriately "
    "completes the request."
)


def alpaca_prompt(instruction: str, input_text: str) -> str:
    """Assemble the full single-string prompt sent to a completion endpoint."""
    return (
        f"{_ALPACA_PREAMBLE}\n\n### Instruction:\n{instruction}\n\n"
        f"### Input:\n{input_text}\n\n### Response:\n"
    )


@dataclass(frozen=True)
class TokenBudget:
    """Budget for one task: ``max_tokens`` must exceed the combined template
    overhead ``prompt_tokens + instruction_tokens``."""

    max_tokens: int = DEFAULT_MAX_TOKENS
    prompt_tokens: int = 0
    instruction_tokens: int = 0

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.instruction_tokens < 0:
            raise BudgetError("template token lengths must be non-negative")
        if self.max_tokens <= self.prompt_tokens + self.instruction_tokens:
            raise BudgetError(
                f"max_tokens {self.max_tokens} does not exceed template overhead "
                f"{self.prompt_tokens}+{self.instruction_tokens}")

    @property
    def section_allowance(self) -> int:
        return self.max_tokens - self.prompt_tokens - self.instruction_tokens


def make_budget(task: TaskKind, counter: TokenCounter,
                max_tokens: int = DEFAULT_MAX_TOKENS) -> TokenBudget:
    """Measure template overhead under *counter* rather than hardcoding it.

    ``prompt_tokens`` is the fully assembled prompt with every slot empty
    (preamble, headers, section labels); ``instruction_tokens`` is the task's
    instruction sentence.
    """
    empty_input = _input_text("", "", "", title=None)
    return TokenBudget(
        max_tokens=max_tokens,
        prompt_tokens=counter.count(alpaca_prompt("", empty_input)),
        instruction_tokens=counter.count(INSTRUCTIONS[task]),
    )


@dataclass(frozen=True)
class Section:
    """Sanitized section text with its token count under the active counter."""

    text: str
    tokens: int


@dataclass(frozen=True)
class SectionSet:
    """The three prompt sections, sanitized. All must be non-empty."""

    objectives: Section
    criteria: Section
    abstract: Section

    @classmethod
    def from_texts(cls, objectives: str, criteria: str, abstract: str,
                   counter: TokenCounter) -> "SectionSet":
        sections = {}
        for name, raw in (("objectives", objectives), ("criteria", criteria),
                          ("abstract", abstract)):
            text = sanitize(raw)
            tokens = counter.count(text)
            if tokens == 0:
                raise TemplateError(f"section {name!r} is empty after sanitizing")
            sections[name] = Section(text, tokens)
        return cls(**sections)

    @property
    def total_tokens(self) -> int:
        return self.objectives.tokens + self.criteria.tokens + self.abstract.tokens


def truncate_section(text: str, counter: TokenCounter) -> str:
    """Shorten *text* by at least one token.

    If the final third of the token sequence (the last ceil(n/3) tokens)
    contains a sentence break, cut after the last such break; otherwise keep
    the first ceil(2n/3) tokens (capped at n-1 so the loop always makes
    progress). Output always ends on a token boundary of the input.
    """
    tokens = counter.encode_with_offsets(text)
    n = len(tokens)
    if n <= 1:
        raise TruncationFloorError(
            f"section of {n} token(s) cannot be truncated further")
    window_start = n - math.ceil(n / 3)
    cut_token: int | None = None
    for offset in find_sentence_breaks(text):
        idx = _token_index_for_offset(tokens, offset)
        # Qualifying break: inside the last third, and cutting there must
        # actually shrink the section.
        if idx is not None and idx >= window_start and idx + 1 < n:
            cut_token = idx
    if cut_token is not None:
        return text[: tokens[cut_token].end]
    keep = min(math.ceil(2 * n / 3), n - 1)
    return text[: tokens[keep - 1].end]


def _token_index_for_offset(tokens: Sequence, offset: int) -> int | None:
    """Index of the last token whose span starts at or before *offset*."""
    idx = None
    for i, tok in enumerate(tokens):
        if tok.start <= offset:
            idx = i
        else:
            break
    return idx


def fit_to_budget(sections: SectionSet, budget: TokenBudget,
                  counter: TokenCounter) -> SectionSet:
    """Iteratively truncate the longest section until the budget is met.

    Ties between equally long sections break in the fixed order objectives,
    criteria, abstract. Identity when the input already fits.
    """
    current = sections
    while current.total_tokens > budget.section_allowance:
        name, section = max(
            (("objectives", current.objectives), ("criteria", current.criteria),
             ("abstract", current.abstract)),
            key=lambda item: item[1].tokens)
        if section.tokens <= 1:
            raise BudgetError(
                "budget unreachable: all sections at the one-token floor, "
                f"need {current.total_tokens} <= {budget.section_allowance}")
        shorter = truncate_section(section.text, counter)
        current = replace(current, **{name: Section(shorter, counter.count(shorter))})
    return current


def _input_text(abstract: str, objectives: str, criteria: str,
                title: str | None) -> str:
    parts = []
    if title is not None:
        parts.append(f"Title: {title}")
    parts.append(f"Abstract: {abstract}")
    parts.append(f"Objectives: {objectives}")
    parts.append(f"Selection Criteria: {criteria}")
    return "\n\n".join(parts)


def render_alpaca(task: TaskKind, sections: SectionSet,
                  title: str | None = None) -> tuple[str, str]:
    """Instruction sentence plus the labeled-section input block."""
    instruction = INSTRUCTIONS[task]
    input_text = _input_text(sections.abstract.text, sections.objectives.text,
                             sections.criteria.text, title)
    return instruction, input_text


_CHAT_SCREENING_LINES = (
    "I am screening papers for a systematic literature review.",
    "The topic of the systematic review is {topic}.",
    "The objectives of the systematic review are {objectives}",
    "The selection criteria of the review is {criteria}",
    "The study should focus exclusively on this topic.",
    "Decide if the article should be included or excluded from the systematic review.",
    "I give the title and abstract of the article as input.",
    "Only answer Included or Excluded.",
    "Be lenient. I prefer including papers by mistake rather than excluding them by mistake.",
    "Title: {title}",
    "Abstract: {abstract}",
)

_CHAT_EXCLUSION_LINES = (
    "I am screening papers for a systematic literature review.",
    "The topic of the systematic review is {topic}.",
    "The objectives of the systematic review are {objectives}",
    "The selection criteria of the review is {criteria}",
    "The study should focus exclusively on this topic and be within this selection criteria.",
    "The following article has been excluded. Please provide the reason why it "
    "has been excluded as best you can.",
    "I give the abstract of the article as input.",
    "Only answer Included or Excluded.",
    "Be concise and only provide a single reason.",
    "Abstract: {abstract}",
)


def _fill_lines(lines: Iterable[str], slots: dict[str, str]) -> str:
    for name, value in slots.items():
        if not value or not value.strip():
            raise TemplateError(f"template slot {name!r} is empty")
    out = []
    for line in lines:
        # Literal replacement (not str.format) so braces in slot values pass
        # through untouched.
        for name, value in slots.items():
            line = line.replace("{" + name + "}", value)
        out.append(line)
    return "\n".join(out)


def render_chat_screening(review: ReviewRecord, study: StudyRecord) -> list[dict[str, str]]:
    """Single user message asking for an Included/Excluded decision."""
    content = _fill_lines(_CHAT_SCREENING_LINES, {
        "topic": review.topic,
        "objectives": review.objectives_short,
        "criteria": review.criteria_short,
        "title": study.title,
        "abstract": study.abstract,
    })
    return [{"role": "user", "content": content}]


def render_chat_exclusion(review: ReviewRecord, study: StudyRecord) -> list[dict[str, str]]:
    """Single user message asking for the exclusion reason."""
    content = _fill_lines(_CHAT_EXCLUSION_LINES, {
        "topic": review.topic,
        "objectives": review.objectives_short,
        "criteria": review.criteria_short,
        "abstract": study.abstract,
    })
    return [{"role": "user", "content": content}]


@dataclass(frozen=True)
class PromptBundle:
    """One instruction-tuning sample with token accounting."""

    task: TaskKind
    instruction: str
    input: str
    expected_output: str
    review_id: str
    study_id: str
    total_tokens: int

    @property
    def bundle_id(self) -> str:
        return make_bundle_id(self.review_id, self.study_id, self.task)


def make_bundle_id(review_id: str, study_id: str, task: TaskKind) -> str:
    """Composite identity; components are percent-encoded so any opaque id
    round-trips."""
    return "::".join((quote(review_id, safe=""), quote(study_id, safe=""), task.value))


def parse_bundle_id(bundle_id: str) -> tuple[str, str, TaskKind]:
    parts = bundle_id.split("::")
    if len(parts) != 3:
        raise ValueError(f"malformed bundle id: {bundle_id!r}")
    return unquote(parts[0]), unquote(parts[1]), TaskKind(parts[2])


_TASK_ORDER = (
    TaskKind.INCLUDE_EXCLUDE,
    TaskKind.POPULATION,
    TaskKind.INTERVENTION,
    TaskKind.OUTCOME,
    TaskKind.EXCLUSION_REASON,
)


def applicable_tasks(study: StudyRecord) -> list[TaskKind]:
    """Include/exclude always applies; annotation tasks only where the study
    carries the corresponding text."""
    tasks = [TaskKind.INCLUDE_EXCLUDE]
    if study.population is not None:
        tasks.append(TaskKind.POPULATION)
    if study.intervention is not None:
        tasks.append(TaskKind.INTERVENTION)
    if study.outcome is not None:
        tasks.append(TaskKind.OUTCOME)
    if study.exclusion_reason is not None:
        tasks.append(TaskKind.EXCLUSION_REASON)
    return tasks


def _expected_output(task: TaskKind, study: StudyRecord) -> str:
    if task is TaskKind.INCLUDE_EXCLUDE:
        return study.gold.to_wire()
    if task is TaskKind.POPULATION:
        return study.population or ""
    if task is TaskKind.INTERVENTION:
        return study.intervention or ""
    if task is TaskKind.OUTCOME:
        return study.outcome or ""
    return study.exclusion_reason or ""


def build_dataset(instances: Sequence[ScreeningInstance],
                  tasks: Iterable[TaskKind],
                  counter: TokenCounter,
                  max_tokens: int = DEFAULT_MAX_TOKENS) -> list[PromptBundle]:
    """Build one bundle per (instance, applicable task), budget-fitted.

    Template overhead is measured per task under *counter*. After rendering,
    the full prompt is re-counted; if boundary effects of a sub-word counter
    pushed it past the budget, fitting reruns with a correspondingly tighter
    allowance until the rendered prompt fits.
    """
    budgets = {task: make_budget(task, counter, max_tokens) for task in _ordered_tasks(tasks)}
    bundles: list[PromptBundle] = []
    for inst in instances:
        study = inst.study
        for task in applicable_tasks(study):
            if task not in budgets:
                continue
            try:
                sections = SectionSet.from_texts(
                    inst.review.objectives_short, inst.review.criteria_short,
                    study.abstract, counter)
                fitted = fit_to_budget(sections, budgets[task], counter)
                instruction, input_text = render_alpaca(task, fitted)
                total = counter.count(alpaca_prompt(instruction, input_text))
                budget = budgets[task]
                while total > max_tokens:
                    budget = replace(budget, max_tokens=budget.max_tokens - (total - max_tokens))
                    fitted = fit_to_budget(fitted, budget, counter)
                    instruction, input_text = render_alpaca(task, fitted)
                    total = counter.count(alpaca_prompt(instruction, input_text))
            except (BudgetError, TemplateError) as exc:
                raise type(exc)(
                    f"review {inst.review.review_id!r} study {study.study_id!r}: {exc}"
                ) from exc
            bundles.append(PromptBundle(
                task=task,
                instruction=instruction,
                input=input_text,
                expected_output=_expected_output(task, study),
                review_id=inst.review.review_id,
                study_id=study.study_id,
                total_tokens=total,
            ))
    return bundles


def _ordered_tasks(tasks: Iterable[TaskKind]) -> list[TaskKind]:
    chosen = set(tasks)
    return [t for t in _TASK_ORDER if t in chosen]


def bundle_to_record(bundle: PromptBundle) -> dict:
    """Wire form of a bundle; field names are part of the file format."""
    return {
        "task": bundle.task.value,
        "instruction": bundle.instruction,
        "input": bundle.input,
        "output": bundle.expected_output,
        "review_id": bundle.review_id,
        "study_id": bundle.study_id,
        "total_tokens": bundle.total_tokens,
    }


def load_bundles(path) -> list[PromptBundle]:
    bundles = []
    for _, obj in iter_records(path):
        bundles.append(PromptBundle(
            task=TaskKind(obj["task"]),
            instruction=obj["instruction"],
            input=obj["input"],
            expected_output=obj["output"],
            review_id=obj["review_id"],
            study_id=obj["study_id"],
            total_tokens=int(obj["total_tokens"]),
        ))
    return bundles
