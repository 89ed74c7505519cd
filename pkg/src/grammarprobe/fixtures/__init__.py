"""Bundled fixtures: mini grammar book, recorded transcripts, golden outputs.

The fixture pipeline is the offline proof that the whole system is
deterministic: every LLM call it makes is covered by the bundled transcript
cache, and every artifact it writes is pinned by a golden file.
``verify_fixtures`` replays the full pipeline into a scratch directory and
fails with a unified diff on any drift. Layout details: ``docs/fixtures.md``.
"""

from __future__ import annotations

import difflib
import filecmp
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path

import click

from ..errors import GoldenMismatch

# Task-run scale of the recorded fixture pipeline.
TASK_INSTANCES = 40
SWEEP_INSTANCES = 25
FIXTURE_MODELS = ("lorelei-mini", "lorelei-midi", "lorelei-maxi")
FIXTURE_SEED = 20401


def data_dir() -> Path:
    return Path(__file__).resolve().parent / "data"


@dataclass(frozen=True)
class FixtureSet:
    mini_book: Path
    transcripts: Path
    golden: Path
    vocab: Path

    @classmethod
    def locate(cls) -> "FixtureSet":
        root = data_dir()
        return cls(mini_book=root / "mini_book.json",
                   transcripts=root / "transcripts",
                   golden=root / "golden",
                   vocab=root / "vocab.txt")


def _invoke(args: list[str]) -> None:
    """Run one CLI command in-process; domain errors propagate to the caller."""
    from ..cli import cli

    try:
        cli.main(args=args, standalone_mode=False)
    except click.exceptions.Exit as e:
        if e.exit_code != 0:
            raise


def pipeline_commands(fx: FixtureSet) -> list[list[str]]:
    """The full recorded pipeline, ingest through report."""
    cmds: list[list[str]] = [
        ["ingest", "--book", str(fx.mini_book)],
        ["segment"],
        ["extract"],
        ["generate"],
        ["backcheck"],
        ["pairs"],
    ]
    for kind in (1, 2, 3, 4):
        cmds.append(["tasks", "build", "--kind", str(kind),
                     "--instances", str(TASK_INSTANCES)])
    for model in FIXTURE_MODELS:
        for kind in (1, 2, 3, 4):
            cmds.append(["tasks", "run", "--kind", str(kind), "--model", model])
    cmds.append(["tasks", "sweep", "--kind", "1", "--n", "2,4,6,8",
                 "--model", "lorelei-midi", "--instances", str(SWEEP_INSTANCES)])
    cmds.append(["tasks", "sweep", "--kind", "4", "--n", "2,4,6",
                 "--model", "lorelei-midi", "--instances", str(SWEEP_INSTANCES)])
    for model in FIXTURE_MODELS:
        cmds.append(["translate", "--model", model])
        cmds.append(["score", "--metrics", "chrfpp,bleu,judge",
                     "--hyp", f"@run/translations/{model}.jsonl",
                     "--ref", "@run/corpus/segments.jsonl",
                     "--src", "@run/corpus/segments.jsonl",
                     "--vocab", str(fx.vocab),
                     "--model-tag", model])
    cmds.append(["report"])
    cmds.append(["validate"])
    return cmds


def run_fixture_pipeline(runs_root: Path, cache_dir: Path,
                         replay_only: bool = True,
                         run_id: str = "fixture") -> Path:
    """Execute the whole fixture pipeline via the real CLI."""
    fx = FixtureSet.locate()
    base = ["--runs-root", str(runs_root), "--run-id", run_id,
            "--cache-dir", str(cache_dir), "--seed", str(FIXTURE_SEED)]
    if replay_only:
        base.append("--replay-only")
    run_dir = runs_root / run_id
    for cmd in pipeline_commands(fx):
        cmd = [a.replace("@run", str(run_dir)) if a.startswith("@run") else a
               for a in cmd]
        _invoke(base + cmd)
    return run_dir


def _compare_trees(golden: Path, fresh: Path) -> list[str]:
    """Relative paths whose bytes differ, plus files present on one side only."""
    problems: list[str] = []
    golden_files = {p.relative_to(golden) for p in golden.rglob("*") if p.is_file()}
    fresh_files = {p.relative_to(fresh) for p in fresh.rglob("*") if p.is_file()}
    for rel in sorted(golden_files - fresh_files):
        problems.append(f"missing from fresh run: {rel}")
    for rel in sorted(fresh_files - golden_files):
        problems.append(f"not in golden set: {rel}")
    for rel in sorted(golden_files & fresh_files):
        if not filecmp.cmp(golden / rel, fresh / rel, shallow=False):
            problems.append(f"content drift: {rel}")
    return problems


def _diff_snippet(golden: Path, fresh: Path, rel: str, limit: int = 40) -> str:
    try:
        a = (golden / rel).read_text(encoding="utf-8").splitlines(keepends=True)
        b = (fresh / rel).read_text(encoding="utf-8").splitlines(keepends=True)
    except (UnicodeDecodeError, FileNotFoundError):
        return "(binary or missing; no diff)"
    diff = list(difflib.unified_diff(a, b, fromfile=f"golden/{rel}",
                                     tofile=f"fresh/{rel}"))
    return "".join(diff[:limit])


def verify_fixtures() -> str:
    """Replay the pipeline and diff every artifact against the golden set.

    Raises :class:`GoldenMismatch` with the first differing file's stage and
    a unified diff; a missing transcript surfaces as the underlying
    ``ReplayMiss`` naming the request hash.
    """
    fx = FixtureSet.locate()
    if not fx.golden.exists():
        raise GoldenMismatch(f"no golden outputs at {fx.golden}; run "
                             "`python -m grammarprobe.fixtures.build` first")
    with tempfile.TemporaryDirectory(prefix="grammarprobe-verify-") as tmp:
        fresh = run_fixture_pipeline(Path(tmp), fx.transcripts, replay_only=True)
        problems = _compare_trees(fx.golden, fresh)
        if problems:
            first_drift = next((p.split(": ", 1)[1] for p in problems
                                if p.startswith("content drift")), None)
            detail = "\n".join(problems[:20])
            snippet = ""
            if first_drift:
                stage = first_drift.split("/", 1)[0]
                snippet = (f"\nfirst drifting stage: {stage}\n"
                           + _diff_snippet(fx.golden, fresh, first_drift))
            raise GoldenMismatch(f"{len(problems)} fixture artifact(s) drifted:\n"
                                 f"{detail}{snippet}")
        n_files = sum(1 for p in fx.golden.rglob("*") if p.is_file())
    return (f"fixture pipeline verified: {n_files} golden artifacts "
            f"byte-identical, 0 replay misses")


def cleanup_stale(run_dir: Path) -> None:
    if run_dir.exists():
        shutil.rmtree(run_dir)
