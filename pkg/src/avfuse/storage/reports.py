import json
import sys
from pathlib import Path
from typing import Iterable

from pydantic import BaseModel

from avfuse.storage.files import atomic_write_text


def to_json(row: BaseModel | dict) -> str:
    if isinstance(row, BaseModel):
        return row.model_dump_json()
    return json.dumps(row)


def emit_jsonl(rows: Iterable[BaseModel | dict], out: str | Path | None = None) -> None:
    """Line-delimited JSON to a file (atomically) or to stdout."""
    lines = "".join(to_json(r) + "\n" for r in rows)
    if out is None:
        sys.stdout.write(lines)
        sys.stdout.flush()
    else:
        atomic_write_text(out, lines)


def write_json(path: str | Path, row: BaseModel | dict) -> None:
    atomic_write_text(path, to_json(row) + "\n")
