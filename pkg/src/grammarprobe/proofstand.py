"""The four probing tasks: build, render, run, score, sweep.

Instance building is fully determined by (dataset, config): sampling runs on
a version-stable seeded stream, so the same seed reproduces candidate sets
and their order byte-exactly. Scoring treats an unparseable reply as
incorrect and reports its rate separately, so parse failures can never
inflate accuracy.
"""

from __future__ import annotations

import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .atelier import ExamplePair, GrammarPoint
from .errors import InsufficientPool, MixedKinds, PreconditionError
from .forge import MinimalPair
from .hashio import append_jsonl, read_jsonl, stable_id, write_jsonl
from .llm import LlmClient, make_request
from .prompts import TemplateSet
from .sampling import DetRng, derive_seed
from .stats import binomial_std, bootstrap_std

log = logging.getLogger(__name__)

TASK_KINDS = ("T1", "T2", "T3", "T4")
LABELS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


@dataclass(frozen=True)
class TaskConfig:
    kind: str
    n_grammars: int = 2                # T1/T3 candidate descriptions
    n_sentences: int = 1               # T2 distractors; T3 correct count
    n_candidates: int = 2              # T4 candidate sentences (sweep knob)
    seed: int = 0
    instances: int = 50
    t2_mode: str = "select"

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"kind must be one of {TASK_KINDS}")
        if self.instances < 1:
            raise ValueError("instances must be >= 1")
        if self.kind == "T1" and self.n_grammars < 2:
            raise ValueError("T1 needs n_grammars >= 2")
        if self.kind == "T2" and self.n_sentences < 1:
            raise ValueError("T2 needs n_sentences >= 1")
        if self.kind == "T3" and not self.n_grammars >= self.n_sentences >= 1:
            raise ValueError("T3 needs n_grammars >= n_sentences >= 1")
        if self.kind == "T4" and self.n_candidates < 2:
            raise ValueError("T4 needs n_candidates >= 2")
        if self.t2_mode not in ("select", "judge"):
            raise ValueError("t2_mode must be select or judge")


@dataclass(frozen=True)
class TaskInstance:
    instance_id: str
    kind: str
    stem: str
    candidates: tuple[str, ...]        # option texts, label order A, B, C...
    key: frozenset[str]                # correct labels
    provenance: dict = field(default_factory=dict, hash=False, compare=False)
    variant: str = ""                  # "judge" marks the T2 yes/no reading

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(LABELS[: len(self.candidates)])

    def to_record(self) -> dict:
        return {"instance_id": self.instance_id, "kind": self.kind,
                "stem": self.stem, "candidates": list(self.candidates),
                "key": sorted(self.key), "provenance": self.provenance,
                "variant": self.variant}

    @classmethod
    def from_record(cls, rec: dict) -> "TaskInstance":
        return cls(instance_id=rec["instance_id"], kind=rec["kind"],
                   stem=rec["stem"], candidates=tuple(rec["candidates"]),
                   key=frozenset(rec["key"]), provenance=rec.get("provenance", {}),
                   variant=rec.get("variant", ""))


@dataclass(frozen=True)
class TaskResult:
    instance_id: str
    kind: str
    model_id: str
    raw_reply: str
    parsed: frozenset[str] | None      # None = unparseable, always incorrect
    correct: bool
    latency_ms: int = 0
    overlap: float = 0.0               # |parsed & key| / |key|, T3 diagnostic

    def to_record(self) -> dict:
        return {"instance_id": self.instance_id, "kind": self.kind,
                "model_id": self.model_id, "raw_reply": self.raw_reply,
                "parsed": sorted(self.parsed) if self.parsed is not None else None,
                "correct": self.correct, "latency_ms": self.latency_ms,
                "overlap": self.overlap}

    @classmethod
    def from_record(cls, rec: dict) -> "TaskResult":
        parsed = rec.get("parsed")
        return cls(instance_id=rec["instance_id"], kind=rec["kind"],
                   model_id=rec["model_id"], raw_reply=rec["raw_reply"],
                   parsed=None if parsed is None else frozenset(parsed),
                   correct=rec["correct"], latency_ms=rec.get("latency_ms", 0),
                   overlap=rec.get("overlap", 0.0))


@dataclass
class Dataset:
    """The task-building pool: points, verified pairs, minimal pairs."""

    points: list[GrammarPoint]
    pairs: list[ExamplePair]
    minimal_pairs: list[MinimalPair] = field(default_factory=list)

    def __post_init__(self):
        self.points_by_id = {p.gp_id: p for p in self.points}
        self.verified = [p for p in self.pairs if p.status == "verified"]
        self.pairs_by_point: dict[str, list[ExamplePair]] = {}
        for pair in self.verified:
            self.pairs_by_point.setdefault(pair.gp_ids[0], []).append(pair)

    @classmethod
    def load(cls, points_path, pairs_path, minimal_path=None) -> "Dataset":
        points = [GrammarPoint.from_record(r) for r in read_jsonl(points_path)]
        pairs = [ExamplePair.from_record(r) for r in read_jsonl(pairs_path)]
        minimal = []
        if minimal_path is not None and Path(minimal_path).exists():
            minimal = [MinimalPair.from_record(r) for r in read_jsonl(minimal_path)]
        return cls(points=points, pairs=pairs, minimal_pairs=minimal)

    def description(self, gp_id: str) -> str:
        point = self.points_by_id.get(gp_id)
        if point is None:
            raise PreconditionError(f"dataset has no grammar point {gp_id}")
        return point.description


def _finish(kind: str, ordinal: int, stem: str, options: list[tuple[str, str]],
            rng: DetRng, provenance: dict, variant: str = "",
            shuffle: bool = True) -> TaskInstance:
    """Shuffle (text, origin-gp) options, assign labels, and seal the instance.

    ``options`` entries whose origin gp is in provenance["stem_gp_ids"] become
    key labels; option origins are stored per label for key-soundness audits.
    """
    options = list(options)
    if shuffle:
        rng.shuffle(options)
    texts = tuple(t for t, _ in options)
    if len(set(texts)) != len(texts):
        raise InsufficientPool("candidate texts collide; pool too small to "
                               "sample distinct options")
    true_ids = set(provenance.get("stem_gp_ids", ()))
    key = frozenset(LABELS[i] for i, (_, gp) in enumerate(options) if gp in true_ids)
    provenance = dict(provenance)
    provenance["option_gp_ids"] = [gp for _, gp in options]
    return TaskInstance(
        instance_id=stable_id(f"t{kind[1]}", kind, ordinal, stem, texts),
        kind=kind, stem=stem, candidates=texts, key=key,
        provenance=provenance, variant=variant)


def build_task1(dataset: Dataset, cfg: TaskConfig, rng: DetRng) -> list[TaskInstance]:
    """One target sentence (with its English side), n descriptions, one true."""
    if len(dataset.points) < cfg.n_grammars:
        raise InsufficientPool(f"need {cfg.n_grammars} grammar points, have "
                               f"{len(dataset.points)}")
    if not dataset.verified:
        raise InsufficientPool("no verified pairs to build stems from")
    instances = []
    for i in range(cfg.instances):
        pair = rng.choice(dataset.verified)
        true_gp = dataset.points_by_id[pair.gp_ids[0]]
        pool = [p for p in dataset.points if p.gp_id not in pair.gp_ids]
        if len(pool) < cfg.n_grammars - 1:
            raise InsufficientPool(f"only {len(pool)} distractor points outside "
                                   f"pair {pair.pair_id}")
        distractors = rng.sample(pool, cfg.n_grammars - 1)
        stem = (f"Luxembourgish: {pair.luxembourgish}\n"
                f"English: {pair.english}")
        options = [(true_gp.description, true_gp.gp_id)]
        options += [(d.description, d.gp_id) for d in distractors]
        instances.append(_finish("T1", i, stem, options, rng,
                                 {"pair_ids": [pair.pair_id],
                                  "stem_gp_ids": [true_gp.gp_id]}))
    return instances


def build_task2(dataset: Dataset, cfg: TaskConfig, rng: DetRng) -> list[TaskInstance]:
    """A grammar description; pick the sentence that demonstrates it.

    ``select`` mode shows 1 matching + n_sentences distractor sentences.
    ``judge`` mode shows one sentence and asks yes/no.
    """
    eligible = [gp for gp in dataset.points if gp.gp_id in dataset.pairs_by_point]
    if not eligible:
        raise InsufficientPool("no grammar point has a verified pair")
    instances = []
    for i in range(cfg.instances):
        gp = rng.choice(eligible)
        own = dataset.pairs_by_point[gp.gp_id]
        if cfg.t2_mode == "judge":
            others = [p for p in dataset.verified if gp.gp_id not in p.gp_ids]
            matching = rng.below(2) == 0 if others else True
            pair = rng.choice(own if matching else others)
            stem = (f"Grammar knowledge point: {gp.description}\n"
                    f"Luxembourgish sentence: {pair.luxembourgish}")
            instance = TaskInstance(
                instance_id=stable_id("t2", "T2", i, stem, ("Yes", "No")),
                kind="T2", stem=stem, candidates=("Yes", "No"),
                key=frozenset("A" if matching else "B"),
                provenance={"pair_ids": [pair.pair_id],
                            "stem_gp_ids": [gp.gp_id],
                            "option_gp_ids": []},
                variant="judge")
            instances.append(instance)
            continue
        true_pair = rng.choice(own)
        seen = {true_pair.luxembourgish}
        pool = []
        for p in dataset.verified:
            if gp.gp_id in p.gp_ids or p.luxembourgish in seen:
                continue
            seen.add(p.luxembourgish)
            pool.append(p)
        if len(pool) < cfg.n_sentences:
            raise InsufficientPool(f"only {len(pool)} distinct distractor "
                                   f"sentences outside point {gp.gp_id}")
        distractors = rng.sample(pool, cfg.n_sentences)
        options = [(true_pair.luxembourgish, gp.gp_id)]
        options += [(p.luxembourgish, p.gp_ids[0]) for p in distractors]
        instances.append(_finish(
            "T2", i, gp.description, options, rng,
            {"pair_ids": [true_pair.pair_id] + [p.pair_id for p in distractors],
             "stem_gp_ids": [gp.gp_id]}))
    return instances


def _as_sentence(text: str) -> str:
    return text if text and text[-1] in ".!?" else text + "."


def build_task3(dataset: Dataset, cfg: TaskConfig, rng: DetRng) -> list[TaskInstance]:
    """A paragraph of n_sentences sentences; find their grammar points."""
    eligible = [gp for gp in dataset.points if gp.gp_id in dataset.pairs_by_point]
    if len(eligible) < cfg.n_sentences:
        raise InsufficientPool(f"need {cfg.n_sentences} points with verified "
                               f"pairs, have {len(eligible)}")
    if len(dataset.points) < cfg.n_grammars:
        raise InsufficientPool(f"need {cfg.n_grammars} grammar points, have "
                               f"{len(dataset.points)}")
    instances = []
    for i in range(cfg.instances):
        chosen = rng.sample(eligible, cfg.n_sentences)
        chosen_pairs = [rng.choice(dataset.pairs_by_point[gp.gp_id]) for gp in chosen]
        covered = {g for p in chosen_pairs for g in p.gp_ids}
        pool = [p for p in dataset.points if p.gp_id not in covered]
        need = cfg.n_grammars - cfg.n_sentences
        if len(pool) < need:
            raise InsufficientPool(f"only {len(pool)} distractor points outside "
                                   "the sampled paragraph")
        distractors = rng.sample(pool, need)
        paragraph = " ".join(_as_sentence(p.luxembourgish) for p in chosen_pairs)
        options = [(gp.description, gp.gp_id) for gp in chosen]
        options += [(d.description, d.gp_id) for d in distractors]
        instances.append(_finish(
            "T3", i, paragraph, options, rng,
            {"pair_ids": [p.pair_id for p in chosen_pairs],
             "stem_gp_ids": [gp.gp_id for gp in chosen]}))
    return instances


def build_task4(dataset: Dataset, cfg: TaskConfig, rng: DetRng) -> list[TaskInstance]:
    """Pick the acceptable sentence from a minimal pair.

    The base task shows the pair's two sentences; the option-count sweep
    widens the candidate set with ungrammatical sentences borrowed from
    other minimal pairs.
    """
    if not dataset.minimal_pairs:
        raise InsufficientPool("no minimal pairs in dataset")
    instances = []
    for i in range(cfg.instances):
        mp = rng.choice(dataset.minimal_pairs)
        if mp.correct == mp.incorrect:
            raise PreconditionError(f"minimal pair {mp.mp_id} is degenerate")
        texts = {mp.correct, mp.incorrect}
        options = [(mp.correct, mp.gp_id), (mp.incorrect, f"!{mp.gp_id}")]
        if cfg.n_candidates > 2:
            pool = []
            for other in dataset.minimal_pairs:
                if other.mp_id == mp.mp_id or other.incorrect in texts:
                    continue
                texts.add(other.incorrect)
                pool.append(other)
            need = cfg.n_candidates - 2
            if len(pool) < need:
                raise InsufficientPool(f"only {len(pool)} extra ungrammatical "
                                       "sentences available")
            for other in rng.sample(pool, need):
                options.append((other.incorrect, f"!{other.gp_id}"))
        stem = dataset.description(mp.gp_id)
        instances.append(_finish("T4", i, stem, options, rng,
                                 {"minimal_pair_ids": [mp.mp_id],
                                  "stem_gp_ids": [mp.gp_id]}))
    return instances


_BUILDERS = {"T1": build_task1, "T2": build_task2, "T3": build_task3,
             "T4": build_task4}


def build_tasks(dataset: Dataset, cfg: TaskConfig) -> list[TaskInstance]:
    """Dispatch to the kind's builder with a seed-derived RNG stream."""
    rng = DetRng(derive_seed(cfg.seed, "build", cfg.kind))
    return _BUILDERS[cfg.kind](dataset, cfg, rng)


# --- rendering and parsing ---

def answer_format(key_size: int) -> str:
    if key_size == 1:
        return ("Answer with exactly one option letter. The last line of your "
                "reply must be exactly: ANSWER: <letter>")
    slots = ", ".join(["<letter>"] * key_size)
    return (f"Answer with exactly {key_size} distinct option letters. The last "
            f"line of your reply must be exactly: ANSWER: {slots}")


def render_options(instance: TaskInstance) -> str:
    return "\n".join(f"{label}) {text}"
                     for label, text in zip(instance.labels, instance.candidates))


def render_prompt(instance: TaskInstance, templates: TemplateSet) -> str:
    name = f"task{instance.kind[1]}"
    if instance.variant == "judge":
        name = "task2_judge"
    fields = {"stem": instance.stem, "options": render_options(instance),
              "answer_format": answer_format(len(instance.key))}
    if instance.kind == "T3":
        fields["key_count"] = len(instance.key)
    return templates.render(name, **fields)


_ANSWER_LINE = re.compile(r"ANSWER\s*:\s*(.+)", re.IGNORECASE)
_TOKEN = re.compile(r"[A-Za-z]+")


def _labels_from(payload: str, labels: tuple[str, ...],
                 strict: bool) -> frozenset[str] | None:
    picked = []
    for token in _TOKEN.findall(payload):
        if len(token) == 1 and token.upper() in labels:
            picked.append(token.upper())
        elif token.lower() == "and":
            continue
        elif strict:
            return None
    return frozenset(picked) if picked else None


def parse_answer(raw: str, instance: TaskInstance) -> frozenset[str] | None:
    """Extract the chosen labels, or None for Unparseable.

    The last ``ANSWER:`` line wins; without one, a reply that is nothing but
    bare letters or a comma list is accepted. For T3 the parsed set must
    have exactly the key's size. Unparseable is a value scored incorrect,
    not an error.
    """
    labels = instance.labels
    parsed: frozenset[str] | None = None
    matches = _ANSWER_LINE.findall(raw)
    if matches:
        payload = matches[-1].strip()
        parsed = _labels_from(payload, labels, strict=False)
        if parsed is None:
            # a reply like "ANSWER: Yes" naming the option text verbatim
            for label, text in zip(labels, instance.candidates):
                if payload.casefold().rstrip(".") == text.casefold():
                    parsed = frozenset([label])
                    break
    else:
        parsed = _labels_from(raw.strip(), labels, strict=True)
    if parsed is None:
        return None
    if instance.kind == "T3" and len(parsed) != len(instance.key):
        return None
    return parsed


# --- running and scoring ---

def run_tasks(instances: list[TaskInstance], client: LlmClient, model_id: str,
              provider: str, templates: TemplateSet,
              results_path: str | Path | None = None,
              workers: int = 1) -> list[TaskResult]:
    """One result per instance, resumable and incrementally persisted.

    Already-persisted instance ids are not re-run. New results are appended
    as they complete; on full success the file is rewritten in instance
    order so finished artifacts are byte-stable regardless of completion
    order.
    """
    done: dict[str, TaskResult] = {}
    foreign: list[dict] = []
    if results_path is not None and Path(results_path).exists():
        for rec in read_jsonl(results_path):
            if rec["model_id"] == model_id:
                done[rec["instance_id"]] = TaskResult.from_record(rec)
            else:
                foreign.append(rec)
    write_lock = threading.Lock()

    def one(instance: TaskInstance) -> TaskResult:
        cached = done.get(instance.instance_id)
        if cached is not None:
            return cached
        prompt = render_prompt(instance, templates)
        req = make_request(provider, model_id, [("user", prompt)], purpose="task")
        side = {"labels": list(instance.labels), "key": sorted(instance.key),
                "pick": len(instance.key), "instance_id": instance.instance_id}
        completion = client.call(req, side)
        parsed = parse_answer(completion.text, instance)
        overlap = (len(parsed & instance.key) / len(instance.key)
                   if parsed is not None and instance.key else 0.0)
        result = TaskResult(
            instance_id=instance.instance_id, kind=instance.kind,
            model_id=model_id, raw_reply=completion.text, parsed=parsed,
            correct=parsed is not None and parsed == instance.key,
            latency_ms=0 if completion.cached else completion.latency_ms,
            overlap=overlap)
        if results_path is not None:
            with write_lock:
                append_jsonl(results_path, result.to_record())
        return result

    if workers <= 1 or len(instances) <= 1:
        results = [one(inst) for inst in instances]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, instances))
    if results_path is not None:
        # normalize the completion-order journal to instance order,
        # keeping any other model's records intact
        write_jsonl(results_path, foreign + [r.to_record() for r in results])
    return results


@dataclass(frozen=True)
class TaskReport:
    kind: str
    n: int
    accuracy: float
    std: float                         # seeded bootstrap of the mean
    binomial_std: float                # closed form, for comparison
    unparseable_rate: float
    partial_credit: float | None = None  # T3 diagnostic: mean key overlap

    def to_record(self) -> dict:
        rec = {"kind": self.kind, "n": self.n, "accuracy": self.accuracy,
               "std": self.std, "binomial_std": self.binomial_std,
               "unparseable_rate": self.unparseable_rate}
        if self.partial_credit is not None:
            rec["partial_credit"] = self.partial_credit
        return rec


def score_tasks(results: list[TaskResult], resamples: int = 1000,
                seed: int = 0) -> TaskReport:
    """Accuracy with bootstrap std over a single-kind result list."""
    if not results:
        raise PreconditionError("score_tasks needs at least one result")
    kinds = {r.kind for r in results}
    if len(kinds) != 1:
        raise MixedKinds(f"results mix task kinds: {sorted(kinds)}")
    kind = kinds.pop()
    outcomes = [1.0 if r.correct else 0.0 for r in results]
    accuracy = sum(outcomes) / len(outcomes)
    partial = None
    if kind == "T3":
        partial = sum(r.overlap for r in results) / len(results)
    return TaskReport(
        kind=kind, n=len(results), accuracy=accuracy,
        std=bootstrap_std(outcomes, resamples=resamples, seed=seed),
        binomial_std=binomial_std(accuracy, len(outcomes)),
        unparseable_rate=sum(1 for r in results if r.parsed is None) / len(results),
        partial_credit=partial)


def sweep_config(kind: str, n: int, seed: int, instances: int,
                 t3_n_sentences: int = 2, t2_mode: str = "select") -> TaskConfig:
    """Map 'n candidates shown' onto the kind's knobs for the option sweep."""
    if kind == "T1":
        return TaskConfig(kind=kind, n_grammars=n, seed=seed, instances=instances)
    if kind == "T2":
        if n < 2:
            raise ValueError("T2 sweep needs n >= 2")
        return TaskConfig(kind=kind, n_sentences=n - 1, seed=seed,
                          instances=instances, t2_mode=t2_mode)
    if kind == "T3":
        return TaskConfig(kind=kind, n_grammars=n, n_sentences=t3_n_sentences,
                          seed=seed, instances=instances)
    if kind == "T4":
        return TaskConfig(kind=kind, n_candidates=n, seed=seed, instances=instances)
    raise ValueError(f"unknown kind {kind!r}")


@dataclass
class SweepReport:
    kind: str
    rows: list[dict]                   # {n, accuracy, std, n_instances}

    def to_rows(self) -> list[dict]:
        return self.rows


def option_sweep(dataset: Dataset, kind: str, n_values: list[int],
                 client: LlmClient, model_id: str, provider: str,
                 templates: TemplateSet, seed: int, instances: int,
                 t3_n_sentences: int = 2, workers: int = 1) -> SweepReport:
    """Accuracy as a function of candidate-set size, shared master seed."""
    rows = []
    for n in n_values:
        cfg = sweep_config(kind, n, derive_seed(seed, "sweep", kind, n),
                           instances, t3_n_sentences=t3_n_sentences)
        built = build_tasks(dataset, cfg)
        results = run_tasks(built, client, model_id, provider, templates,
                            workers=workers)
        report = score_tasks(results)
        rows.append({"n": n, "accuracy": report.accuracy, "std": report.std,
                     "n_instances": report.n})
    return SweepReport(kind=kind, rows=rows)
