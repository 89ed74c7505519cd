"""Back-check, policy filtering, and minimal-pair forging."""

from __future__ import annotations

import pytest

from grammarprobe.atelier import ExamplePair, PromptSettings
from grammarprobe.config import ForgePolicy
from grammarprobe.errors import DegenerateContrast, MissingVerdict, PreconditionError
from grammarprobe.fixtures import data_dir
from grammarprobe.forge import (
    BackcheckVerdict,
    MinimalPair,
    backcheck_pair,
    filter_verified,
    forge_minimal_pair,
    levenshtein,
)
from grammarprobe.hashio import read_jsonl
from grammarprobe.llm import ScriptedProvider
from grammarprobe.prompts import TemplateSet

from conftest import make_point, offline_client


def ps():
    return PromptSettings(provider="mock", model_id="judge-1",
                          templates=TemplateSet.load())


def pair(status="unchecked", n=0, gp=None):
    gp = gp or make_point(n)
    return ExamplePair(pair_id=f"pr-{n:04d}", gp_ids=(gp.gp_id,),
                       english=f"English sentence {n}.",
                       luxembourgish=f"Frasa {n} kun marker.",
                       target_length=15, status=status)


def verdict(pair_id, rule=True, score=8.0):
    return BackcheckVerdict(pair_id=pair_id, instantiates_rule=rule,
                            translation_score=score, judge_model="judge-1")


GOOD_VERDICT = '```json\n{"instantiates_rule": true, "translation_score": 8.5, "rationale": "fine"}\n```'
BAD_VERDICT = '```json\n{"instantiates_rule": false, "translation_score": 9.5, "rationale": "wrong rule"}\n```'


def test_backcheck_known_good():
    client = offline_client(ScriptedProvider([GOOD_VERDICT]))
    v = backcheck_pair(pair(), make_point(0), client, ps())
    assert v.instantiates_rule is True
    assert v.translation_score >= 7
    assert v.judge_model == "judge-1"


def test_backcheck_wrong_grammar():
    client = offline_client(ScriptedProvider([BAD_VERDICT]))
    v = backcheck_pair(pair(), make_point(0), client, ps())
    assert v.instantiates_rule is False


def test_backcheck_requires_unchecked():
    client = offline_client(ScriptedProvider([GOOD_VERDICT]))
    with pytest.raises(PreconditionError):
        backcheck_pair(pair(status="verified"), make_point(0), client, ps())


def test_backcheck_clamps_score():
    reply = '```json\n{"instantiates_rule": true, "translation_score": 14}\n```'
    client = offline_client(ScriptedProvider([reply]))
    v = backcheck_pair(pair(), make_point(0), client, ps())
    assert v.translation_score == 10.0


def test_filter_gates():
    pairs = [pair(n=0), pair(n=1)]
    verdicts = [verdict("pr-0000", rule=True, score=8.0),
                verdict("pr-0001", rule=False, score=9.5)]
    verified, rejected, summary = filter_verified(
        pairs, verdicts, ForgePolicy(require_rule=True, min_score=6.0))
    assert [p.pair_id for p in verified] == ["pr-0000"]
    assert [p.pair_id for p in rejected] == ["pr-0001"]
    assert verified[0].status == "verified"
    assert rejected[0].status == "rejected"
    assert summary.retention_rate == 0.5


def test_filter_rule_gate_only():
    pairs = [pair(n=0)]
    verdicts = [verdict("pr-0000", rule=False, score=9.5)]
    _, rejected, _ = filter_verified(pairs, verdicts,
                                     ForgePolicy(require_rule=True, min_score=0))
    assert len(rejected) == 1
    verified, _, _ = filter_verified(pairs, verdicts,
                                     ForgePolicy(require_rule=False, min_score=0))
    assert len(verified) == 1


def test_filter_is_exact_partition():
    pairs = [pair(n=i) for i in range(10)]
    verdicts = [verdict(p.pair_id, rule=i % 3 != 0, score=5 + i * 0.5)
                for i, p in enumerate(pairs)]
    verified, rejected, summary = filter_verified(pairs, verdicts, ForgePolicy())
    assert len(verified) + len(rejected) == len(pairs)
    assert {p.pair_id for p in verified} | {p.pair_id for p in rejected} == \
        {p.pair_id for p in pairs}
    assert not {p.pair_id for p in verified} & {p.pair_id for p in rejected}
    assert summary.total == 10


def test_filter_monotone_in_min_score():
    pairs = [pair(n=i) for i in range(20)]
    verdicts = [verdict(p.pair_id, rule=True, score=i * 0.5)
                for i, p in enumerate(pairs)]
    sizes = []
    for threshold in (0.0, 2.0, 4.0, 6.0, 8.0, 10.0):
        verified, _, _ = filter_verified(
            pairs, verdicts, ForgePolicy(require_rule=True, min_score=threshold))
        sizes.append(len(verified))
    assert sizes == sorted(sizes, reverse=True)


def test_filter_missing_verdict():
    with pytest.raises(MissingVerdict):
        filter_verified([pair(n=0)], [], ForgePolicy())


def test_retention_fixture_94_of_100():
    root = data_dir() / "retention"
    pairs = [ExamplePair.from_record(r) for r in read_jsonl(root / "pairs.jsonl")]
    verdicts = [BackcheckVerdict.from_record(r)
                for r in read_jsonl(root / "verdicts.jsonl")]
    assert len(pairs) == 100
    _, _, summary = filter_verified(pairs, verdicts, ForgePolicy())
    assert summary.retention_rate == pytest.approx(0.94)


FORGE_REPLY = ('```json\n{"incorrect": "Frasa 0 kun sbaljo.", '
               '"edit_summary": "swapped the marker"}\n```')


def test_forge_minimal_pair():
    client = offline_client(ScriptedProvider([FORGE_REPLY]))
    gp = make_point(0)
    mp = forge_minimal_pair(pair(status="verified", gp=gp), gp, client, ps())
    assert mp.correct == "Frasa 0 kun marker."
    assert mp.incorrect == "Frasa 0 kun sbaljo."
    assert mp.gp_id == gp.gp_id
    assert mp.edit_distance == levenshtein(mp.correct, mp.incorrect)


def test_forge_degenerate_guard():
    echo = '```json\n{"incorrect": "Frasa 0  kun   marker.", "edit_summary": "?"}\n```'
    client = offline_client(ScriptedProvider([echo]))
    gp = make_point(0)
    with pytest.raises(DegenerateContrast):
        forge_minimal_pair(pair(status="verified", gp=gp), gp, client, ps())


def test_forge_requires_verified():
    client = offline_client(ScriptedProvider([FORGE_REPLY]))
    gp = make_point(0)
    with pytest.raises(PreconditionError):
        forge_minimal_pair(pair(status="unchecked", gp=gp), gp, client, ps())


def test_levenshtein():
    assert levenshtein("", "abc") == 3
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("same", "same") == 0


def test_minimal_pair_round_trip():
    mp = MinimalPair(mp_id="mp-1", gp_id="gp-1", correct="A b.", incorrect="A c.",
                     edit_summary="swap", edit_distance=1)
    assert MinimalPair.from_record(mp.to_record()) == mp
