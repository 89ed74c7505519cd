"""Regenerate the bundled fixture data from scratch.

Usage: ``python -m grammarprobe.fixtures.build``

Writes the mini grammar book, the subword vocabulary, the 100-pair
retention fixture, then records the full pipeline with the synthesizer
provider (filling the transcript cache) and replays it to freeze the golden
outputs. Rerunning is idempotent: the same bytes come out every time.
"""

from __future__ import annotations

import json
import os
import shutil
import string
import tempfile
from pathlib import Path

from ..hashio import stable_id, write_json, write_jsonl
from . import FixtureSet, data_dir, run_fixture_pipeline
from .synth import book_interchange

SUBWORDS = [
    "▁do", "▁don", "▁dom", "▁dei", "▁da", "▁den", "▁wan", "▁nix", "▁sen",
    "▁en", "▁mira", "▁sela", "▁tovan", "▁brin", "▁lumo", "▁fiskar", "▁velt",
    "▁kemp", "▁noper", "aen", "oen", "en", "ela", "el", "er", "ch", "lopt",
    "sift", "kenat", "dramt", "gelt", "▁the", "▁and", "ing", "ion",
]

EXTRA_CHARS = "äëéöüÄËÉÖÜàèç’▁"


def write_vocab(path: Path) -> None:
    lines = ["<unk>"]
    lines += SUBWORDS
    lines += list(string.ascii_lowercase)
    lines += list(string.ascii_uppercase)
    lines += list(string.digits)
    lines += list(string.punctuation)
    lines += list(EXTRA_CHARS)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_retention_fixture(out_dir: Path, total: int = 100, passing: int = 94) -> None:
    """A verdict set with a known retention rate (passing/total)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs, verdicts = [], []
    for i in range(total):
        english = f"Retention fixture sentence number {i} keeps the accounting honest."
        lux = f"Retencion frasa numer {i} tient la conta onesta."
        pair_id = stable_id("pr", "retention", english, lux)
        pairs.append({"pair_id": pair_id, "gp_ids": ["gp-retentionfixture0"],
                      "english": english, "luxembourgish": lux,
                      "target_length": 10, "status": "unchecked", "flags": []})
        verdicts.append({"pair_id": pair_id, "instantiates_rule": i < passing,
                         "translation_score": 8.0, "judge_model": "fixture-judge",
                         "rationale": "retention fixture"})
    write_jsonl(out_dir / "pairs.jsonl", pairs)
    write_jsonl(out_dir / "verdicts.jsonl", verdicts)


def main() -> None:
    root = data_dir()
    root.mkdir(parents=True, exist_ok=True)

    book = book_interchange()
    write_json(root / "mini_book.json", book)
    write_vocab(root / "vocab.txt")
    write_retention_fixture(root / "retention")

    fx = FixtureSet.locate()
    if fx.transcripts.exists():
        shutil.rmtree(fx.transcripts)
    fx.transcripts.mkdir(parents=True)

    os.environ["GRAMMARPROBE_FIXTURE_SYNTH"] = "1"
    try:
        with tempfile.TemporaryDirectory(prefix="grammarprobe-record-") as tmp:
            run_fixture_pipeline(Path(tmp), fx.transcripts, replay_only=False)
    finally:
        os.environ.pop("GRAMMARPROBE_FIXTURE_SYNTH", None)

    # Freeze golden from a replay pass so replayed runs match it byte-exactly.
    with tempfile.TemporaryDirectory(prefix="grammarprobe-golden-") as tmp:
        run_dir = run_fixture_pipeline(Path(tmp), fx.transcripts, replay_only=True)
        if fx.golden.exists():
            shutil.rmtree(fx.golden)
        shutil.copytree(run_dir, fx.golden)

    transcripts = sum(1 for _ in fx.transcripts.glob("*/*.json"))
    artifacts = sum(1 for p in fx.golden.rglob("*") if p.is_file())
    manifest = json.loads((fx.golden / "manifest.json").read_text(encoding="utf-8"))
    print(f"fixtures rebuilt: {transcripts} transcripts, {artifacts} golden "
          f"artifacts, {len(manifest['stages'])} pipeline stages")


if __name__ == "__main__":
    main()
