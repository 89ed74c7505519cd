"""Native metric implementations against brute-force oracles and contracts."""

from __future__ import annotations

import random

import pytest

from grammarprobe.errors import AlignmentMismatch, EmptyReference, VocabMissing
from grammarprobe.fixtures import FixtureSet
from grammarprobe.llm import ScriptedProvider
from grammarprobe.metrics import (
    MetricScore,
    SubwordVocab,
    bleu,
    chrf_pp,
    detokenize_subword,
    judge_translation,
    load_external_scores,
    ngram_profile,
    score_corpus,
    spbleu,
    tokenize_subword,
    translate_corpus,
)
from grammarprobe.prompts import TemplateSet

from conftest import offline_client
from oracles import bleu_oracle, chrf_oracle, random_pair, random_text


def ps():
    from grammarprobe.atelier import PromptSettings

    return PromptSettings(provider="mock", model_id="m",
                          templates=TemplateSet.load())


# --- chrF++ ---

def test_chrf_identity():
    assert chrf_pp("Moien Welt", "Moien Welt") == 100.0


def test_chrf_empty_hypothesis():
    assert chrf_pp("", "Moien Welt") == 0.0


def test_chrf_empty_reference():
    with pytest.raises(EmptyReference):
        chrf_pp("Moien", "")


def test_chrf_against_oracle_example():
    value = chrf_pp("hello there", "hello here")
    assert value == pytest.approx(chrf_oracle("hello there", "hello here"),
                                  rel=1e-9)


def test_chrf_disjoint_is_zero():
    assert chrf_pp("aaa", "zzz") == 0.0


def test_chrf_short_identity():
    # single char: only char-1 and word-1 layers contribute
    assert chrf_pp("a", "a") == 100.0


def test_chrf_oracle_sweep():
    rng = random.Random(99)
    for _ in range(300):
        hyp, ref = random_pair(rng)
        assert chrf_pp(hyp, ref) == pytest.approx(chrf_oracle(hyp, ref),
                                                  rel=1e-9, abs=1e-12)


# --- BLEU ---

def test_bleu_identity():
    assert bleu(["a", "b", "c"], ["a", "b", "c"]) == 100.0
    assert bleu(["one"], ["one"]) == 100.0


def test_bleu_zero_overlap_none_smoothing():
    assert bleu(["x", "y"], ["a", "b"], smoothing="none") == 0.0


def test_bleu_empty_reference():
    with pytest.raises(EmptyReference):
        bleu(["a"], [])


def test_bleu_brevity_penalty_case():
    # hyp 4 tokens, ref 8 tokens, all hyp n-grams present in ref
    ref = ["a", "b", "c", "d", "e", "f", "g", "h"]
    hyp = ["a", "b", "c", "d"]
    value = bleu(hyp, ref)
    oracle = bleu_oracle(hyp, ref)
    assert value == pytest.approx(oracle, rel=1e-12)
    import math

    assert value == pytest.approx(100.0 * math.exp(1 - 8 / 4), rel=1e-12)


def test_bleu_monotone_brevity():
    ref = [f"t{i}" for i in range(10)]
    previous_bp_score = None
    for h in range(9, 0, -1):
        hyp = ref[:h]
        score = bleu(hyp, ref)
        if previous_bp_score is not None:
            assert score <= previous_bp_score
        previous_bp_score = score


def test_bleu_oracle_sweep():
    rng = random.Random(1234)
    for _ in range(300):
        hyp, ref = random_pair(rng)
        for smoothing in ("exp", "none"):
            assert bleu(hyp.split(), ref.split(), smoothing=smoothing) == \
                pytest.approx(bleu_oracle(hyp.split(), ref.split(),
                                          smoothing=smoothing),
                              rel=1e-9, abs=1e-12)


def test_ngram_profile_mass():
    for n in (1, 2, 3):
        profile = ngram_profile("abcde", n)
        assert profile.total == max(0, 5 - n + 1)
    assert ngram_profile("ab", 4).total == 0


# --- subword tokenizer ---

def test_greedy_longest_match_trace(tmp_path):
    vocab = SubwordVocab(["<unk>", "▁mo", "ien", "▁", "m", "o",
                          "i", "e", "n"])
    assert tokenize_subword("moien", vocab) == ["▁mo", "ien"]


def test_unknown_characters(tmp_path):
    vocab = SubwordVocab(["<unk>", "▁", "a"])
    assert tokenize_subword("aЖa", vocab) == ["▁", "a", "<unk>", "a"]


def test_tokenize_empty():
    vocab = SubwordVocab(["<unk>", "▁", "a"])
    assert tokenize_subword("", vocab) == []


def test_round_trip_over_alphabet():
    fx = FixtureSet.locate()
    vocab = SubwordVocab.load(fx.vocab)
    rng = random.Random(7)
    for _ in range(200):
        text = random_text(rng)
        assert detokenize_subword(tokenize_subword(text, vocab)) == text


def test_vocab_missing_file(tmp_path):
    with pytest.raises(VocabMissing):
        SubwordVocab.load(tmp_path / "nope.txt")


def test_vocab_requires_unk():
    with pytest.raises(VocabMissing):
        SubwordVocab(["a", "b"])


def test_spbleu_identity():
    vocab = SubwordVocab.load(FixtureSet.locate().vocab)
    assert spbleu("Moien Welt", "Moien Welt", vocab) == 100.0


# --- elicitation ---

def test_translate_corpus_resume_and_persist():
    segments = [{"segment_id": f"s{i}", "english": f"Sentence {i}.",
                 "luxembourgish": f"Frasa {i}."} for i in range(3)]
    client = offline_client(ScriptedProvider(["Frasa 1 nova.", "Frasa 2 nova."]))
    done = {"s0": "Frasa 0 cached."}
    seen = []
    out = translate_corpus(segments, "en-lb", client, ps(), done=done,
                           on_result=seen.append)
    assert [o["hypothesis"] for o in out] == [
        "Frasa 0 cached.", "Frasa 1 nova.", "Frasa 2 nova."]
    assert len(seen) == 2  # only fresh segments persisted
    assert client.providers["mock"].calls == 2


def test_translate_empty_corpus():
    client = offline_client(ScriptedProvider([]))
    assert translate_corpus([], "en-lb", client, ps()) == []


def test_judge_parses_and_clamps():
    client = offline_client(ScriptedProvider(['```json\n{"score": 12.5}\n```']))
    assert judge_translation("s", "h", "r", client, ps()) == 10.0
    client = offline_client(ScriptedProvider(["7"]))
    assert judge_translation("s", "h", "r", client, ps()) == 7.0


def test_judge_unparseable_after_retries():
    from grammarprobe.errors import UnparseableReply

    client = offline_client(ScriptedProvider(["excellent", "excellent",
                                              "excellent"]))
    with pytest.raises(UnparseableReply):
        judge_translation("s", "h", "r", client, ps())
    assert client.providers["mock"].calls == 3


# --- corpus scoring ---

def test_score_corpus_identity_means():
    hyps = {f"s{i}": f"Frasa identesch {i}." for i in range(4)}
    scored = score_corpus(hyps, dict(hyps), {"chrfpp"})
    assert scored.summary["chrfpp"]["mean"] == pytest.approx(100.0)
    assert scored.summary["chrfpp"]["std"] == pytest.approx(0.0)
    assert len(scored.rows) == 4


def test_score_corpus_matches_oracle_means():
    rng = random.Random(5)
    hyps, refs = {}, {}
    for i in range(10):
        hyp, ref = random_pair(rng)
        hyps[f"s{i}"], refs[f"s{i}"] = hyp, ref
    scored = score_corpus(hyps, refs, {"chrfpp"})
    expected = sum(chrf_oracle(hyps[k], refs[k]) for k in hyps) / len(hyps)
    assert scored.summary["chrfpp"]["mean"] == pytest.approx(expected, rel=1e-9)


def test_score_corpus_alignment_mismatch():
    with pytest.raises(AlignmentMismatch):
        score_corpus({"a": "x"}, {"b": "x"}, {"chrfpp"})


def test_external_requested_but_missing():
    with pytest.raises(AlignmentMismatch):
        score_corpus({"a": "x"}, {"a": "x"}, {"external"})


def test_external_merge_and_scale(tmp_path):
    path = tmp_path / "ext.jsonl"
    path.write_text('{"segment_id": "a", "score": 0.75}\n', encoding="utf-8")
    ext = load_external_scores(path)
    scored = score_corpus({"a": "x y"}, {"a": "x y"}, {"external"},
                          external_scores=ext)
    assert scored.rows[0].value == 0.75
    with pytest.raises(ValueError):
        MetricScore("external", 1.5, "a")


def test_metric_score_scale_enforced():
    with pytest.raises(ValueError):
        MetricScore("chrfpp", 101.0, "s")
    with pytest.raises(ValueError):
        MetricScore("judge", -0.1, "s")
