"""Report emission: comma-separated tables plus text summaries.

Undefined metric values are written as the literal token ``undefined`` so
degenerate denominators stay visible in downstream tooling.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Sequence

UNDEFINED = "undefined"


def fmt_metric(value: float | None) -> str:
    return UNDEFINED if value is None else f"{value:.6f}"


def write_csv(path: str | Path, fieldnames: Sequence[str], rows: Sequence[dict],
              header: dict[str, Any]) -> None:
    """CSV with a leading ``#`` metadata line carrying the run header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8", newline="") as fh:
        fh.write("# " + json.dumps(header, ensure_ascii=False, sort_keys=True) + "\n")
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    os.replace(tmp, path)


def write_text(path: str | Path, lines: Sequence[str], header: dict[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    body = "# " + json.dumps(header, ensure_ascii=False, sort_keys=True) + "\n"
    body += "\n".join(lines) + "\n"
    tmp.write_text(body, encoding="utf-8")
    os.replace(tmp, path)


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_run_record(output_dir: str | Path, command: str, snapshot: dict,
                     started: str, finished: str,
                     outputs: Sequence[str | Path]) -> Path:
    """Atomic end-of-run record with digests of every file written."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = {
        "command": command,
        "config": snapshot,
        "started": started,
        "finished": finished,
        "outputs": {str(p): file_digest(p) for p in outputs},
    }
    path = out / f"run_record_{command.replace('-', '_')}.json"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path
