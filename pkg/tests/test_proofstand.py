"""Task building, rendering, parsing, running, and scoring."""

from __future__ import annotations

import dataclasses

import pytest

from grammarprobe.errors import InsufficientPool, MissingTemplate, MixedKinds
from grammarprobe.llm import OracleProvider, RandomAnswerProvider
from grammarprobe.prompts import TemplateSet
from grammarprobe.proofstand import (
    Dataset,
    TaskConfig,
    TaskInstance,
    TaskResult,
    build_task4,
    build_tasks,
    option_sweep,
    parse_answer,
    render_prompt,
    run_tasks,
    score_tasks,
    sweep_config,
)
from grammarprobe.sampling import DetRng

from conftest import make_dataset, offline_client


@pytest.fixture(scope="module")
def dataset():
    return make_dataset(n_points=30, pairs_per_point=3, n_minimal=40)


def cfg(kind, **kwargs):
    defaults = dict(seed=11, instances=20)
    defaults.update(kwargs)
    return TaskConfig(kind=kind, **defaults)


# --- TaskConfig invariants ---

@pytest.mark.parametrize("kwargs", [
    dict(kind="T1", n_grammars=1),
    dict(kind="T2", n_sentences=0),
    dict(kind="T3", n_grammars=2, n_sentences=3),
    dict(kind="T4", n_candidates=1),
    dict(kind="T9"),
])
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        TaskConfig(**kwargs)


# --- builders ---

def test_t1_base_two_candidates(dataset):
    instances = build_tasks(dataset, cfg("T1", n_grammars=2))
    assert len(instances) == 20
    for inst in instances:
        assert len(inst.candidates) == 2
        assert len(inst.key) == 1
        assert "Luxembourgish:" in inst.stem and "English:" in inst.stem


def test_t1_pool_exactly_n(dataset):
    small = make_dataset(n_points=4, pairs_per_point=2, n_minimal=4)
    instances = build_tasks(small, cfg("T1", n_grammars=4, instances=10))
    assert all(len(i.candidates) == 4 for i in instances)


def test_t1_insufficient_pool():
    tiny = make_dataset(n_points=2, pairs_per_point=1, n_minimal=2)
    with pytest.raises(InsufficientPool):
        build_tasks(tiny, cfg("T1", n_grammars=5))


def test_t1_determinism(dataset):
    a = build_tasks(dataset, cfg("T1", n_grammars=4))
    b = build_tasks(dataset, cfg("T1", n_grammars=4))
    assert [i.to_record() for i in a] == [i.to_record() for i in b]
    c = build_tasks(dataset, cfg("T1", n_grammars=4, seed=12))
    assert [i.to_record() for i in a] != [i.to_record() for i in c]


def test_t2_base_two_candidates(dataset):
    instances = build_tasks(dataset, cfg("T2", n_sentences=1))
    assert all(len(i.candidates) == 2 and len(i.key) == 1 for i in instances)


def test_t2_ten_candidates(dataset):
    instances = build_tasks(dataset, cfg("T2", n_sentences=9))
    assert all(len(i.candidates) == 10 for i in instances)


def test_t2_candidates_distinct_with_duplicate_pool():
    data = make_dataset(n_points=6, pairs_per_point=2, n_minimal=6)
    # inject duplicate sentence strings across points
    dup = [dataclasses.replace(p, pair_id=p.pair_id + "x",
                               luxembourgish="Duplikata frasa.")
           for p in data.pairs[:6]]
    data = Dataset(points=data.points, pairs=data.pairs + dup,
                   minimal_pairs=data.minimal_pairs)
    instances = build_tasks(data, cfg("T2", n_sentences=3, instances=30))
    for inst in instances:
        assert len(set(inst.candidates)) == len(inst.candidates)


def test_t2_judge_mode(dataset):
    instances = build_tasks(dataset, cfg("T2", t2_mode="judge", instances=40))
    keys = set()
    for inst in instances:
        assert inst.candidates == ("Yes", "No")
        assert inst.variant == "judge"
        keys |= inst.key
    assert keys == {"A", "B"}  # both matching and non-matching cases sampled


def test_t3_base_shape(dataset):
    instances = build_tasks(dataset, cfg("T3", n_grammars=4, n_sentences=2))
    for inst in instances:
        assert len(inst.candidates) == 4
        assert len(inst.key) == 2
        assert inst.stem.count(".") >= 2  # period-joined sentences


def test_t3_degenerate_all_correct(dataset):
    instances = build_tasks(dataset, cfg("T3", n_grammars=3, n_sentences=3))
    for inst in instances:
        assert inst.key == frozenset(inst.labels)


def test_t3_deterministic_paragraphs(dataset):
    a = build_tasks(dataset, cfg("T3", n_grammars=4, n_sentences=2))
    b = build_tasks(dataset, cfg("T3", n_grammars=4, n_sentences=2))
    assert [i.stem for i in a] == [i.stem for i in b]


def test_t4_two_candidates(dataset):
    instances = build_tasks(dataset, cfg("T4"))
    for inst in instances:
        assert len(inst.candidates) == 2
        assert len(inst.key) == 1
        assert inst.stem  # grammar description present


def test_t4_shuffle_is_binomial(dataset):
    instances = build_tasks(dataset, cfg("T4", instances=1000, seed=5))
    first = sum(1 for i in instances if i.key == frozenset("A"))
    p = first / 1000
    sigma = (0.25 / 1000) ** 0.5
    assert abs(p - 0.5) <= 3 * sigma


def test_t4_widened_candidates(dataset):
    instances = build_tasks(dataset, cfg("T4", n_candidates=6))
    for inst in instances:
        assert len(inst.candidates) == 6
        assert len(set(inst.candidates)) == 6


def test_t4_asserts_distinctness(dataset):
    import dataclasses as dc

    broken = dc.replace(dataset.minimal_pairs[0], incorrect=
                        dataset.minimal_pairs[0].correct)
    data = Dataset(points=dataset.points, pairs=dataset.pairs,
                   minimal_pairs=[broken])
    from grammarprobe.errors import PreconditionError

    with pytest.raises(PreconditionError):
        build_task4(data, cfg("T4", instances=1), DetRng(0))


def test_key_soundness_all_kinds(dataset):
    for kind, extra in (("T1", dict(n_grammars=4)),
                        ("T2", dict(n_sentences=3)),
                        ("T3", dict(n_grammars=4, n_sentences=2))):
        for inst in build_tasks(dataset, cfg(kind, **extra)):
            option_ids = inst.provenance["option_gp_ids"]
            stem_ids = set(inst.provenance["stem_gp_ids"])
            for label, gp in zip(inst.labels, option_ids):
                assert (label in inst.key) == (gp in stem_ids)


# --- rendering ---

def test_render_contains_paper_box_text(dataset, templates):
    inst = build_tasks(dataset, cfg("T1"))[0]
    text = render_prompt(inst, templates)
    assert text.startswith("Carefully examine the Luxembourgish sentence and "
                           "its English equivalent.")
    assert "ANSWER: <letter>" in text
    assert "A) " in text and "B) " in text


def test_render_t3_names_key_count(dataset, templates):
    inst = build_tasks(dataset, cfg("T3", n_grammars=4, n_sentences=2))[0]
    text = render_prompt(inst, templates)
    assert "Identify 2 grammar points" in text
    assert "2 distinct option letters" in text


def test_render_t4_labels_both_sentences(dataset, templates):
    inst = build_tasks(dataset, cfg("T4"))[0]
    text = render_prompt(inst, templates)
    for label, cand in zip(inst.labels, inst.candidates):
        assert f"{label}) {cand}" in text


def test_unknown_placeholder_fails_at_load():
    with pytest.raises(MissingTemplate):
        TemplateSet({"task1": "text with {unknown_slot}"})


def test_missing_template(dataset, templates):
    inst = build_tasks(dataset, cfg("T1"))[0]
    broken = TemplateSet({})
    with pytest.raises(MissingTemplate):
        render_prompt(inst, broken)


# --- answer parsing ---

def make_instance(kind="T1", n=3, key=("B",)):
    return TaskInstance(instance_id="i", kind=kind, stem="s",
                        candidates=tuple(f"opt{i}" for i in range(n)),
                        key=frozenset(key))


@pytest.mark.parametrize("raw,expected", [
    ("ANSWER: B", {"B"}),
    ("I reason at length...\nANSWER: B", {"B"}),
    ("answer: b", {"B"}),
    ("ANSWER: B.", {"B"}),
    ("ANSWER: A\nwait no\nANSWER: C", {"C"}),
    ("B", {"B"}),
    ("A, C", None),  # |parsed| != |key| is fine for T1: set != key, still parsed
    ("both look fine", None),
    ("ANSWER: Z", None),
    ("", None),
])
def test_parse_single_key(raw, expected):
    inst = make_instance()
    parsed = parse_answer(raw, inst)
    if expected is None and raw == "A, C":
        assert parsed == {"A", "C"}  # parsed but wrong; scored incorrect
    else:
        assert parsed == (frozenset(expected) if expected else None)


def test_parse_t3_exact_size():
    inst = make_instance(kind="T3", n=4, key=("A", "C"))
    assert parse_answer("I think A and C. ANSWER: A, C", inst) == {"A", "C"}
    assert parse_answer("ANSWER: A", inst) is None
    assert parse_answer("ANSWER: A, B, C", inst) is None


def test_parse_option_text_fallback():
    inst = TaskInstance(instance_id="i", kind="T2", stem="s",
                        candidates=("Yes", "No"), key=frozenset("A"),
                        variant="judge")
    assert parse_answer("ANSWER: Yes", inst) == {"A"}
    assert parse_answer("ANSWER: no", inst) == {"B"}


def test_unparseable_never_raises_accuracy(dataset, templates):
    instances = build_tasks(dataset, cfg("T1", instances=100))
    client = offline_client(OracleProvider(flip_rate=0.3, seed=2))
    results = run_tasks(instances, client, "m", "mock", templates)
    base = score_tasks(results).accuracy
    for k in (5, 20, 60, 100):
        mangled = [dataclasses.replace(r, parsed=None, correct=False)
                   if i < k else r for i, r in enumerate(results)]
        assert score_tasks(mangled).accuracy <= base + 1e-12


# --- running and scoring ---

def test_oracle_all_correct(dataset, templates):
    instances = build_tasks(dataset, cfg("T3", n_grammars=4, n_sentences=2))
    client = offline_client(OracleProvider())
    results = run_tasks(instances, client, "oracle-m", "mock", templates)
    assert all(r.correct for r in results)
    report = score_tasks(results)
    assert report.accuracy == 1.0
    assert report.std == 0.0
    assert report.partial_credit == 1.0


def test_three_of_four_accuracy():
    results = [TaskResult(f"i{k}", "T1", "m", "r", frozenset("A"), k < 3)
               for k in range(4)]
    assert score_tasks(results).accuracy == 0.75


def test_mixed_kinds_rejected():
    results = [TaskResult("a", "T1", "m", "r", frozenset("A"), True),
               TaskResult("b", "T2", "m", "r", frozenset("A"), True)]
    with pytest.raises(MixedKinds):
        score_tasks(results)


def test_unparseable_rate_reported(dataset, templates):
    results = [TaskResult(f"i{k}", "T4", "m", "?", None, False)
               for k in range(5)]
    results += [TaskResult(f"j{k}", "T4", "m", "ANSWER: A", frozenset("A"), True)
                for k in range(5)]
    report = score_tasks(results)
    assert report.unparseable_rate == 0.5
    assert report.accuracy == 0.5


def test_run_tasks_resume(tmp_path, dataset, templates):
    instances = build_tasks(dataset, cfg("T2", instances=30))
    path = tmp_path / "results.jsonl"
    provider = OracleProvider()
    client = offline_client(provider)
    first = run_tasks(instances[:12], client, "m", "mock", templates,
                      results_path=path)
    assert len(first) == 12
    calls_after_first = provider.calls
    full = run_tasks(instances, client, "m", "mock", templates,
                     results_path=path)
    assert len(full) == 30
    assert provider.calls == calls_after_first + 18  # only new instances ran
    from grammarprobe.hashio import read_jsonl

    records = read_jsonl(path)
    assert len(records) == 30
    assert [r["instance_id"] for r in records] == \
        [i.instance_id for i in instances]


def test_latency_zero_only_when_cached(tmp_path, dataset, templates):
    from grammarprobe.llm import TranscriptCache

    instances = build_tasks(dataset, cfg("T1", instances=5))
    cache = TranscriptCache(tmp_path / "cache")
    client = offline_client(OracleProvider())
    client.cache = cache
    run_tasks(instances, client, "m", "mock", templates)
    replay = offline_client(OracleProvider())
    replay.cache = cache
    replay.replay_only = True
    results = run_tasks(instances, replay, "m", "mock", templates)
    assert all(r.latency_ms == 0 for r in results)
    assert replay.live_calls == 0


# --- sweep ---

def test_sweep_config_mapping():
    assert sweep_config("T1", 6, 1, 10).n_grammars == 6
    assert sweep_config("T2", 6, 1, 10).n_sentences == 5
    assert sweep_config("T3", 6, 1, 10, t3_n_sentences=2).n_grammars == 6
    assert sweep_config("T4", 6, 1, 10).n_candidates == 6


def test_sweep_oracle_flat_ceiling(dataset, templates):
    client = offline_client(OracleProvider())
    report = option_sweep(dataset, "T1", [2, 4, 6], client, "m", "mock",
                          templates, seed=3, instances=30)
    assert [r["accuracy"] for r in report.rows] == [1.0, 1.0, 1.0]


def test_sweep_random_tracks_chance(dataset, templates):
    client = offline_client(RandomAnswerProvider(seed=9))
    report = option_sweep(dataset, "T2", [2, 5], client, "m", "mock",
                          templates, seed=3, instances=400)
    for row in report.rows:
        chance = 1 / row["n"]
        sigma = (chance * (1 - chance) / 400) ** 0.5
        assert abs(row["accuracy"] - chance) <= 3.5 * sigma


def test_sweep_fixed_flip_rate_non_increasing(dataset, templates):
    # a fixed-flip-rate oracle has an n-independent expected accuracy of
    # 1 - p, so its curve is (weakly) non-increasing up to sampling noise
    from grammarprobe.llm import OracleProvider

    p = 0.2
    n_instances = 600
    client = offline_client(OracleProvider(flip_rate=p, seed=21))
    report = option_sweep(dataset, "T1", [2, 4, 6, 8], client, "m", "mock",
                          templates, seed=13, instances=n_instances)
    sigma = (p * (1 - p) / n_instances) ** 0.5
    previous = None
    for row in report.rows:
        assert abs(row["accuracy"] - (1 - p)) <= 3.5 * sigma
        if previous is not None:
            assert row["accuracy"] <= previous + 3 * sigma * 2 ** 0.5
        previous = row["accuracy"]
