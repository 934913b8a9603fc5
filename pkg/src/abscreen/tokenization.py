"""Token counting with character offsets.

The truncation loop in :mod:`abscreen.promptgen` needs two things from a
tokenizer: a token count and, per token, the character span it consumed.
Both are behind the :class:`TokenCounter` interface so the whole pipeline
can run either on the hand-checkable whitespace counter (tests, fixtures)
or on a byte-pair vocabulary loaded from disk.
"""

from __future__ import annotations

import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from .errors import TokenizerError


class Token(NamedTuple):
    """A token id plus the half-open character span it covers."""

    id: int
    start: int
    end: int


class TokenCounter(ABC):
    """Counting interface: immutable after construction, thread-safe."""

    name: str = "abstract"

    @abstractmethod
    def encode_with_offsets(self, text: str) -> list[Token]:
        """Tokenize *text* into ordered, non-overlapping spans."""

    def count(self, text: str) -> int:
        return len(self.encode_with_offsets(text))


_NONSPACE = re.compile(r"\S+")


class WhitespaceCounter(TokenCounter):
    """Tokens are maximal non-whitespace runs; ids carry no meaning."""

    name = "whitespace"

    def encode_with_offsets(self, text: str) -> list[Token]:
        return [Token(0, m.start(), m.end()) for m in _NONSPACE.finditer(text)]


def make_whitespace_counter() -> TokenCounter:
    return WhitespaceCounter()


@dataclass(frozen=True)
class VocabSpec:
    """Paths to a byte-pair vocabulary (one entry per line, ids dense from 0
    in file order) and merge rules (two space-separated parts per line, in
    priority order). ``#`` comment lines and blank lines are skipped."""

    vocab_path: str
    merges_path: str
    byte_fallback: bool = True


class BpeCounter(TokenCounter):
    """Greedy byte-pair encoding with offset tracking.

    Encoding starts from single characters, then repeatedly applies the
    lowest-ranked applicable merge rule to every non-overlapping adjacent
    occurrence (left to right) until no rule applies. Characters absent from
    the vocabulary either fall back to synthetic per-byte tokens (ids after
    the vocabulary range) or raise, depending on ``byte_fallback``.
    """

    name = "bpe"

    def __init__(self, vocab: dict[str, int], merges: list[tuple[str, str]],
                 byte_fallback: bool = True):
        self._vocab = vocab
        self._byte_fallback = byte_fallback
        self._fallback_base = len(vocab)
        self._ranks: dict[tuple[str, str], int] = {}
        for rank, (left, right) in enumerate(merges):
            if left not in vocab or right not in vocab:
                raise TokenizerError(f"merge rule references unknown symbol: {left} {right}")
            if left + right not in vocab:
                raise TokenizerError(f"merge result not in vocabulary: {left + right}")
            self._ranks.setdefault((left, right), rank)

    def encode_with_offsets(self, text: str) -> list[Token]:
        if not text:
            return []
        # Symbols: (vocab string or None for byte fallback, id, start, end).
        syms: list[tuple[str | None, int, int, int]] = []
        for i, ch in enumerate(text):
            tid = self._vocab.get(ch)
            if tid is not None:
                syms.append((ch, tid, i, i + 1))
            elif self._byte_fallback:
                # The first byte keeps the character's span; the rest get
                # zero-width spans so spans never overlap.
                data = ch.encode("utf-8")
                syms.append((None, self._fallback_base + data[0], i, i + 1))
                for b in data[1:]:
                    syms.append((None, self._fallback_base + b, i + 1, i + 1))
            else:
                raise TokenizerError(f"character not in vocabulary at offset {i}: {ch!r}")

        while len(syms) >= 2:
            best_rank: int | None = None
            for (ls, _, _, _), (rs, _, _, _) in zip(syms, syms[1:]):
                if ls is None or rs is None:
                    continue
                rank = self._ranks.get((ls, rs))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank = rank
            if best_rank is None:
                break
            merged: list[tuple[str | None, int, int, int]] = []
            i = 0
            while i < len(syms):
                if i + 1 < len(syms):
                    ls, rs = syms[i][0], syms[i + 1][0]
                    if (ls is not None and rs is not None
                            and self._ranks.get((ls, rs)) == best_rank):
                        combined = ls + rs
                        merged.append((combined, self._vocab[combined],
                                       syms[i][2], syms[i + 1][3]))
                        i += 2
                        continue
                merged.append(syms[i])
                i += 1
            syms = merged

        return [Token(tid, start, end) for _, tid, start, end in syms]


def _read_lines(path: str) -> list[str]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise TokenizerError(f"cannot read tokenizer file {path}: {exc}") from exc
    out = []
    for line in raw.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        out.append(line)
    return out


def make_bpe_counter(spec: VocabSpec) -> TokenCounter:
    """Load a byte-pair counter from a :class:`VocabSpec`."""
    vocab: dict[str, int] = {}
    for entry in _read_lines(spec.vocab_path):
        if entry in vocab:
            raise TokenizerError(f"duplicate vocabulary entry: {entry!r}")
        vocab[entry] = len(vocab)
    merges: list[tuple[str, str]] = []
    for line in _read_lines(spec.merges_path):
        parts = line.split(" ")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise TokenizerError(f"malformed merge rule: {line!r}")
        merges.append((parts[0], parts[1]))
    return BpeCounter(vocab, merges, byte_fallback=spec.byte_fallback)


def find_sentence_breaks(text: str) -> list[int]:
    """Offsets of every ``.`` that ends a sentence.

    A period counts only when followed by whitespace or end-of-text, so
    decimal points inside numbers ("pH 7.4") never qualify.
    """
    last = len(text) - 1
    return [
        i
        for i, ch in enumerate(text)
        if ch == "." and (i == last or text[i + 1].isspace())
    ]


def sanitize(text: str) -> str:
    """Drop every colon; all other characters pass through in order.

    Applied to objectives, criteria and abstracts before counting and prompt
    assembly so the only colons in a rendered prompt are the field labels.
    """
    return text.replace(":", "")
