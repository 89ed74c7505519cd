"""The bridge operation: segment file in, score file out."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .errors import MalformedInput
from .model import load_estimator


def read_segments(in_file: str | Path) -> list[dict]:
    """Parse and validate the request file; errors carry the line number."""
    records: list[dict] = []
    seen: set[str] = set()
    with open(in_file, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedInput(lineno, f"not valid JSON: {e}") from e
            if not isinstance(rec, dict):
                raise MalformedInput(lineno, "record must be an object")
            sid = rec.get("segment_id")
            if not isinstance(sid, str) or not sid:
                raise MalformedInput(lineno, "segment_id must be a non-empty string")
            if sid in seen:
                raise MalformedInput(lineno, f"duplicate segment_id {sid!r}")
            seen.add(sid)
            if not isinstance(rec.get("hypothesis"), str):
                raise MalformedInput(lineno, "hypothesis must be a string")
            reference = rec.get("reference")
            if not isinstance(reference, str) or not reference.strip():
                raise MalformedInput(
                    lineno, "reference required (reference-based scoring)")
            records.append(rec)
    return records


def bridge_score(in_file: str | Path, checkpoint_name: str,
                 out_file: str | Path, batch_size: int = 64) -> int:
    """Score every segment; writes {segment_id, score} per input record.

    Output order matches input order and segment ids map one-to-one.
    Returns the number of segments scored. Deterministic for a fixed
    checkpoint: inference only, no sampling.
    """
    records = read_segments(in_file)
    out_file = Path(out_file)
    if not records:
        out_file.parent.mkdir(parents=True, exist_ok=True)
        out_file.write_text("", encoding="utf-8")
        return 0
    estimator = load_estimator(checkpoint_name)
    scores = estimator.predict(records, batch_size=batch_size)
    out_file.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_file.parent, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as f:
        for rec, score in zip(records, scores):
            f.write(json.dumps({"segment_id": rec["segment_id"],
                                "score": score}) + "\n")
    os.replace(tmp, out_file)
    return len(records)
