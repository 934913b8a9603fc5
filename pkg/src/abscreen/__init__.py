"""abscreen: batch abstract-screening pipeline and evaluation harness."""

from .corpus import (
    ReviewRecord,
    ScreeningDecision,
    ScreeningInstance,
    Split,
    StudyRecord,
)
from .promptgen import PromptBundle, TaskKind, TokenBudget
from .tokenization import TokenCounter, make_bpe_counter, make_whitespace_counter

__version__ = "0.1.0"

__all__ = [
    "PromptBundle",
    "ReviewRecord",
    "ScreeningDecision",
    "ScreeningInstance",
    "Split",
    "StudyRecord",
    "TaskKind",
    "TokenBudget",
    "TokenCounter",
    "make_bpe_counter",
    "make_whitespace_counter",
    "__version__",
]
