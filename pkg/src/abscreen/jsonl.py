"""Line-delimited JSON record I/O.

Every corpus and output file in this package is a UTF-8 text file with one
JSON object per line. Blank lines and lines starting with ``#`` are skipped
on read; output files use a leading ``#`` line to carry run metadata.
"""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Any

from .errors import ConfigError, RecordParseError


def iter_records(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, object)`` for each record line of *path*.

    Line numbers are 1-based and count every physical line, including the
    skipped comment/blank ones, so parse errors point at the real location.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input file does not exist: {path}")
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordParseError(str(path), lineno, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise RecordParseError(str(path), lineno, "record is not a JSON object")
            yield lineno, obj


def dump_line(obj: dict) -> str:
    """Serialize one record deterministically (no key sorting: callers pass
    fields in schema order)."""
    return json.dumps(obj, ensure_ascii=False, separators=(", ", ": "))


def write_records(path: str | Path, records: Iterable[dict],
                  header: dict[str, Any] | None = None) -> None:
    """Write records one per line, preceded by an optional ``#`` header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8", newline="\n") as fh:
        if header is not None:
            fh.write("# " + json.dumps(header, ensure_ascii=False, sort_keys=True) + "\n")
        for rec in records:
            fh.write(dump_line(rec) + "\n")
    os.replace(tmp, path)


def read_header(path: str | Path) -> dict | None:
    """Return the ``#`` header object of an output file, if present."""
    with Path(path).open(encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first.startswith("#"):
        try:
            return json.loads(first.lstrip("# "))
        except json.JSONDecodeError:
            return None
    return None
