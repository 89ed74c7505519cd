"""Canonical hashing and JSONL persistence.

All entity ids are content hashes of a canonical JSON serialization so that
equal content hashes equally across runs and platforms. JSONL writers are
atomic (tmp file + rename) and support keyed upserts so that resumed stages
never duplicate records.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import os
import re
import tempfile
import unicodedata
from pathlib import Path
from typing import Any, Iterable


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and no insignificant whitespace."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def content_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def normalize_text(text: str) -> str:
    """NFC-normalize, casefold, and collapse whitespace runs to single spaces."""
    text = unicodedata.normalize("NFC", text)
    return re.sub(r"\s+", " ", text).strip().casefold()


def stable_id(prefix: str, *parts: Any, length: int = 16) -> str:
    return f"{prefix}-{content_hash(list(parts))[:length]}"


def grammar_point_id(description: str) -> str:
    """Canonical id of a grammar point: hash of its normalized description."""
    return stable_id("gp", normalize_text(description))


def fingerprint_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write-then-rename; concurrent writers of the same path cannot corrupt it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp_name)
        raise


def write_json(path: str | Path, obj: Any) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=True) + "\n")


def read_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def dump_jsonl_line(record: dict) -> str:
    return canonical_json(record) + "\n"


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    atomic_write_text(path, "".join(dump_jsonl_line(r) for r in records))


def upsert_jsonl(path: str | Path, records: Iterable[dict], key: str) -> int:
    """Merge records into a JSONL file keyed by ``key``.

    Existing records keep their position; a record with a known key replaces
    the stored one, new keys are appended. Returns the resulting record count.
    """
    path = Path(path)
    merged: dict[str, dict] = {}
    if path.exists():
        for rec in read_jsonl(path):
            merged[rec[key]] = rec
    for rec in records:
        merged[rec[key]] = rec
    write_jsonl(path, merged.values())
    return len(merged)


def append_jsonl(path: str | Path, record: dict) -> None:
    """Append a single record; used for incremental result persistence."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as f:
        f.write(dump_jsonl_line(record))
