"""CLI behavior: exit codes, stage wiring, resume idempotence, validate."""

from __future__ import annotations

import json

import pytest

from grammarprobe.cli import main
from grammarprobe.fixtures import FIXTURE_SEED, FixtureSet
from grammarprobe.hashio import read_json, read_jsonl


@pytest.fixture()
def runbase(tmp_path):
    fx = FixtureSet.locate()

    def invoke(*args, run_id="r1"):
        return main(["--runs-root", str(tmp_path / "runs"), "--run-id", run_id,
                     "--cache-dir", str(fx.transcripts), "--replay-only",
                     "--seed", str(FIXTURE_SEED), *args])

    return invoke, tmp_path / "runs" / "r1", fx


def test_unknown_flag_exit_2(capsys):
    assert main(["--definitely-not-a-flag"]) == 2


def test_unknown_subcommand_exit_2(capsys):
    assert main(["frobnicate"]) == 2


def test_domain_error_exit_1_with_machine_tail(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    missing.write_text("{}", encoding="utf-8")
    code = main(["--runs-root", str(tmp_path), "ingest", "--book", str(missing)])
    assert code == 1
    err = capsys.readouterr().err
    tail = err.strip().splitlines()[-1]
    payload = json.loads(tail)
    assert payload["error"] == "MalformedInterchange"


def test_help_exit_0(capsys):
    assert main(["--help"]) == 0


def test_ingest_segment_validate(runbase, capsys):
    invoke, run_dir, fx = runbase
    assert invoke("ingest", "--book", str(fx.mini_book)) == 0
    assert invoke("segment") == 0
    chapters = read_jsonl(run_dir / "chapters.jsonl")
    assert [c["section_kind"] for c in chapters] == \
        ["morphology", "syntax", "phonology"]
    manifest = read_json(run_dir / "manifest.json")
    assert "ingest" in manifest["stages"] and "segment" in manifest["stages"]


def test_extract_generate_idempotent_resume(runbase, capsys):
    invoke, run_dir, fx = runbase
    invoke("ingest", "--book", str(fx.mini_book))
    invoke("segment")
    assert invoke("extract") == 0
    points_once = (run_dir / "grammar_points.jsonl").read_bytes()
    assert invoke("extract") == 0  # replayed, byte-identical
    assert (run_dir / "grammar_points.jsonl").read_bytes() == points_once

    assert invoke("generate") == 0
    assert invoke("backcheck") == 0
    verdicts_once = read_jsonl(run_dir / "verdicts.jsonl")
    assert invoke("backcheck") == 0  # upsert: no duplicates
    assert read_jsonl(run_dir / "verdicts.jsonl") == verdicts_once

    assert invoke("pairs") == 0
    pairs = read_jsonl(run_dir / "pairs.jsonl")
    statuses = {p["status"] for p in pairs}
    assert statuses == {"verified", "rejected"}
    summary = read_json(run_dir / "filter_summary.json")
    assert summary["total"] == len(pairs)

    # rerunning the stage must not change any artifact
    pairs_bytes = (run_dir / "pairs.jsonl").read_bytes()
    mp_bytes = (run_dir / "minimal_pairs.jsonl").read_bytes()
    assert invoke("pairs") == 0
    assert read_json(run_dir / "filter_summary.json") == summary
    assert (run_dir / "pairs.jsonl").read_bytes() == pairs_bytes
    assert (run_dir / "minimal_pairs.jsonl").read_bytes() == mp_bytes

    out = capsys.readouterr().out
    assert "retention" in out


def test_full_offline_pipeline_and_validate(runbase, capsys):
    invoke, run_dir, fx = runbase
    for args in (("ingest", "--book", str(fx.mini_book)), ("segment",),
                 ("extract",), ("generate",), ("backcheck",), ("pairs",)):
        assert invoke(*args) == 0
    assert invoke("tasks", "build", "--kind", "4", "--instances", "40") == 0
    assert invoke("tasks", "run", "--kind", "4", "--model", "lorelei-midi") == 0
    report = read_json(run_dir / "results" / "lorelei-midi" / "t4_report.json")
    assert 0.0 <= report["accuracy"] <= 1.0
    assert invoke("validate") == 0
    out = capsys.readouterr().out
    assert "grammar_points: 8" in out
    assert "pairs: 31 (per-point 3-4)" in out
    assert "minimal_pairs: 28" in out
    assert "invariants: ok" in out


def test_validate_catches_tampering(runbase, capsys):
    invoke, run_dir, fx = runbase
    invoke("ingest", "--book", str(fx.mini_book))
    invoke("segment")
    invoke("extract")
    points = read_jsonl(run_dir / "grammar_points.jsonl")
    points[0]["description"] = "Tampered description."
    with open(run_dir / "grammar_points.jsonl", "w", encoding="utf-8") as f:
        for p in points:
            f.write(json.dumps(p) + "\n")
    assert invoke("validate") == 1
    err = capsys.readouterr().err
    assert "does not hash its description" in err or "fingerprint drift" in err


def test_oracle_provider_via_cli(runbase):
    invoke, run_dir, fx = runbase

    def live(*args):
        # no --replay-only, no cache: direct mock providers
        return main(["--runs-root", str(run_dir.parent), "--run-id", "r1",
                     "--seed", str(FIXTURE_SEED), *args])

    invoke("ingest", "--book", str(fx.mini_book))
    invoke("segment")
    invoke("extract")
    invoke("generate")
    invoke("backcheck")
    invoke("pairs")
    invoke("tasks", "build", "--kind", "1", "--instances", "25")
    assert live("tasks", "run", "--kind", "1", "--model", "any",
                "--provider", "oracle") == 0
    report = read_json(run_dir / "results" / "any" / "t1_report.json")
    assert report["accuracy"] == 1.0


def test_score_command_with_external(runbase, tmp_path):
    invoke, run_dir, fx = runbase
    hyp = tmp_path / "hyp.jsonl"
    ref = tmp_path / "ref.jsonl"
    ext = tmp_path / "ext.jsonl"
    hyp.write_text('{"segment_id": "s1", "text": "Moien Welt."}\n')
    ref.write_text('{"segment_id": "s1", "text": "Moien Welt."}\n')
    ext.write_text('{"segment_id": "s1", "score": 0.9}\n')
    out = tmp_path / "scores.jsonl"
    code = invoke("score", "--metrics", "chrfpp,bleu,external",
                  "--hyp", str(hyp), "--ref", str(ref),
                  "--external", str(ext), "--vocab", str(fx.vocab),
                  "--out", str(out), "--emit-segments",
                  str(tmp_path / "segments.jsonl"))
    assert code == 0
    rows = read_jsonl(out)
    assert {r["metric"] for r in rows} == {"chrfpp", "bleu", "external"}
    assert all(r["value"] in (100.0, 0.9) for r in rows)
    segments = read_jsonl(tmp_path / "segments.jsonl")
    assert segments[0]["hypothesis"] == "Moien Welt."


def test_score_external_missing_is_error(runbase, tmp_path, capsys):
    invoke, _, _ = runbase
    hyp = tmp_path / "hyp.jsonl"
    hyp.write_text('{"segment_id": "s1", "text": "x"}\n')
    code = invoke("score", "--metrics", "external", "--hyp", str(hyp),
                  "--ref", str(hyp))
    assert code == 1
    assert "AlignmentMismatch" in capsys.readouterr().err


def test_seed_propagates_byte_identical_builds(runbase, tmp_path):
    invoke, run_dir, fx = runbase
    for args in (("ingest", "--book", str(fx.mini_book)), ("segment",),
                 ("extract",), ("generate",), ("backcheck",), ("pairs",)):
        invoke(*args)
    invoke("tasks", "build", "--kind", "3")
    first = (run_dir / "tasks" / "t3.jsonl").read_bytes()
    invoke("tasks", "build", "--kind", "3")
    assert (run_dir / "tasks" / "t3.jsonl").read_bytes() == first
