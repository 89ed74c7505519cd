"""Fixture integrity: replay coverage, golden pinning, drift detection."""

from __future__ import annotations

import json
import shutil

import pytest

from grammarprobe.errors import GoldenMismatch, ReplayMiss
from grammarprobe.fixtures import (
    FIXTURE_MODELS,
    FixtureSet,
    run_fixture_pipeline,
    verify_fixtures,
)
from grammarprobe.fixtures.synth import PAIR_BANKS, PHENOMENA, corrupt
from grammarprobe.hashio import read_jsonl


def test_fixture_set_complete():
    fx = FixtureSet.locate()
    assert fx.mini_book.exists()
    assert fx.vocab.exists()
    assert any(fx.transcripts.glob("*/*.json"))
    assert (fx.golden / "manifest.json").exists()


def test_pair_banks_cover_all_phenomena():
    assert set(PAIR_BANKS) == set(PHENOMENA)
    for bank in PAIR_BANKS.values():
        assert 3 <= sum(1 for _, lux in bank if lux is not None) <= 4


def test_corruptions_always_change_sentence():
    for pid, bank in PAIR_BANKS.items():
        for _, lux in bank:
            if lux is None:
                continue
            incorrect, summary = corrupt(pid, lux)
            assert incorrect != lux, (pid, lux)
            assert summary


def test_verify_fixtures_passes():
    report = verify_fixtures()
    assert "byte-identical" in report
    assert "0 replay misses" in report


def test_golden_accuracies_pinned():
    fx = FixtureSet.locate()
    for model in FIXTURE_MODELS:
        for kind in (1, 2, 3, 4):
            path = fx.golden / "results" / model / f"t{kind}_report.json"
            report = json.loads(path.read_text(encoding="utf-8"))
            assert report["n"] == 40
            assert 0.0 <= report["accuracy"] <= 1.0
    # skill ordering of the recorded personas is visible in every kind
    for kind in (1, 2, 3, 4):
        accs = [json.loads((fx.golden / "results" / m / f"t{kind}_report.json")
                           .read_text())["accuracy"] for m in FIXTURE_MODELS]
        assert accs[0] <= accs[1] <= accs[2]


def test_deleted_transcript_raises_replay_miss(tmp_path):
    fx = FixtureSet.locate()
    partial = tmp_path / "transcripts"
    shutil.copytree(fx.transcripts, partial)
    victim = next(partial.glob("*/*.json"))
    victim_hash = victim.stem
    victim.unlink()
    with pytest.raises(ReplayMiss) as err:
        run_fixture_pipeline(tmp_path / "runs", partial, replay_only=True)
    assert err.value.request_hash == victim_hash


def test_golden_drift_detected(tmp_path, monkeypatch):
    fx = FixtureSet.locate()
    doctored = tmp_path / "golden"
    shutil.copytree(fx.golden, doctored)
    grid = doctored / "report" / "grid.tsv"
    grid.write_text(grid.read_text().replace("lorelei", "xorelei"))
    import grammarprobe.fixtures as fixtures_module

    monkeypatch.setattr(
        fixtures_module.FixtureSet, "locate",
        classmethod(lambda cls: FixtureSet(mini_book=fx.mini_book,
                                           transcripts=fx.transcripts,
                                           golden=doctored, vocab=fx.vocab)))
    with pytest.raises(GoldenMismatch) as err:
        verify_fixtures()
    assert "report/grid.tsv" in str(err.value)
    assert "first drifting stage: report" in str(err.value)


def test_minimal_pairs_trace_to_verified_pairs():
    fx = FixtureSet.locate()
    pairs = read_jsonl(fx.golden / "pairs.jsonl")
    verified_by_sentence = {p["luxembourgish"]: p for p in pairs
                            if p["status"] == "verified"}
    for mp in read_jsonl(fx.golden / "minimal_pairs.jsonl"):
        source = verified_by_sentence[mp["correct"]]
        assert mp["gp_id"] in source["gp_ids"]
        assert mp["correct"] != mp["incorrect"]
