"""Back-checking, filtering, and minimal-pair forging.

Generated pairs are re-judged by an LLM for rule instantiation and
translation quality; pairs failing the policy are discarded. Each surviving
pair then yields a minimally contrasting ungrammatical counterpart for the
acceptability task.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .atelier import ExamplePair, GrammarPoint, PromptSettings
from .config import ForgePolicy
from .errors import DegenerateContrast, MissingVerdict, PreconditionError, UnparseableReply
from .hashio import normalize_text, stable_id
from .llm import LlmClient, make_request
from .replies import request_structured

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BackcheckVerdict:
    pair_id: str
    instantiates_rule: bool
    translation_score: float           # 0..10, LLM-as-judge scale
    judge_model: str
    rationale: str = ""

    def to_record(self) -> dict:
        return {"pair_id": self.pair_id, "instantiates_rule": self.instantiates_rule,
                "translation_score": self.translation_score,
                "judge_model": self.judge_model, "rationale": self.rationale}

    @classmethod
    def from_record(cls, rec: dict) -> "BackcheckVerdict":
        return cls(pair_id=rec["pair_id"], instantiates_rule=rec["instantiates_rule"],
                   translation_score=rec["translation_score"],
                   judge_model=rec["judge_model"], rationale=rec.get("rationale", ""))


@dataclass(frozen=True)
class MinimalPair:
    mp_id: str
    gp_id: str
    correct: str
    incorrect: str
    edit_summary: str
    edit_distance: int = 0             # diagnostic only, not a gate

    def to_record(self) -> dict:
        return {"mp_id": self.mp_id, "gp_id": self.gp_id, "correct": self.correct,
                "incorrect": self.incorrect, "edit_summary": self.edit_summary,
                "edit_distance": self.edit_distance}

    @classmethod
    def from_record(cls, rec: dict) -> "MinimalPair":
        return cls(mp_id=rec["mp_id"], gp_id=rec["gp_id"], correct=rec["correct"],
                   incorrect=rec["incorrect"], edit_summary=rec["edit_summary"],
                   edit_distance=rec.get("edit_distance", 0))


def _validate_verdict(payload) -> dict:
    if not isinstance(payload, dict):
        raise ValueError("expected a JSON object")
    if not isinstance(payload.get("instantiates_rule"), bool):
        raise ValueError("instantiates_rule must be a boolean")
    score = payload.get("translation_score")
    if not isinstance(score, (int, float)):
        raise ValueError("translation_score must be numeric")
    return payload


def backcheck_pair(pair: ExamplePair, gp: GrammarPoint, client: LlmClient,
                   ps: PromptSettings) -> BackcheckVerdict:
    """Judge one unchecked pair for rule instantiation and translation quality."""
    if pair.status != "unchecked":
        raise PreconditionError(f"pair {pair.pair_id} already {pair.status}")
    prompt = ps.templates.render(
        "backcheck", target_language=ps.target_language,
        source_language=ps.source_language, description=gp.description,
        english=pair.english, luxembourgish=pair.luxembourgish)
    req = make_request(ps.provider, ps.model_id, [("user", prompt)],
                       purpose="backcheck")
    payload = request_structured(
        client, req,
        shape='{"instantiates_rule": true/false, "translation_score": 0-10, "rationale": "..."}',
        validate=_validate_verdict, retries=ps.parse_retries)
    score = float(payload["translation_score"])
    if not 0.0 <= score <= 10.0:
        log.warning("backcheck: clamping out-of-range score %.2f for %s",
                    score, pair.pair_id)
        score = min(10.0, max(0.0, score))
    return BackcheckVerdict(pair_id=pair.pair_id,
                            instantiates_rule=payload["instantiates_rule"],
                            translation_score=score, judge_model=ps.model_id,
                            rationale=str(payload.get("rationale", "")))


@dataclass(frozen=True)
class FilterSummary:
    total: int
    verified: int
    rejected: int

    @property
    def retention_rate(self) -> float:
        return self.verified / self.total if self.total else 0.0


def filter_verified(pairs: list[ExamplePair], verdicts: list[BackcheckVerdict],
                    policy: ForgePolicy) -> tuple[list[ExamplePair], list[ExamplePair], FilterSummary]:
    """Partition pairs into verified and rejected under the policy.

    A pair passes iff (it instantiates the rule OR the rule gate is off)
    AND its translation score meets the threshold. Every pair must have
    exactly one verdict. The partition is exact: verified + rejected
    reassemble the input.
    """
    by_pair: dict[str, BackcheckVerdict] = {}
    for v in verdicts:
        by_pair[v.pair_id] = v
    verified: list[ExamplePair] = []
    rejected: list[ExamplePair] = []
    for pair in pairs:
        verdict = by_pair.get(pair.pair_id)
        if verdict is None:
            raise MissingVerdict(f"pair {pair.pair_id} has no back-check verdict")
        ok = ((verdict.instantiates_rule or not policy.require_rule)
              and verdict.translation_score >= policy.min_score)
        if ok:
            verified.append(replace(pair, status="verified"))
        else:
            rejected.append(replace(pair, status="rejected"))
    summary = FilterSummary(total=len(pairs), verified=len(verified),
                            rejected=len(rejected))
    log.info("filter: %d/%d pairs retained (%.4f)", summary.verified,
             summary.total, summary.retention_rate)
    return verified, rejected, summary


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(previous[j] + 1, current[j - 1] + 1,
                               previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def _validate_minimal(payload) -> dict:
    if not isinstance(payload, dict):
        raise ValueError("expected a JSON object")
    if not isinstance(payload.get("incorrect"), str) or not payload["incorrect"].strip():
        raise ValueError("incorrect must be a non-empty string")
    return payload


def forge_minimal_pair(pair: ExamplePair, gp: GrammarPoint, client: LlmClient,
                       ps: PromptSettings) -> MinimalPair:
    """Elicit the ungrammatical twin of a verified pair's target sentence.

    Raises :class:`DegenerateContrast` when the reply echoes the correct
    sentence (compared after whitespace/case normalization); such items are
    dropped by the driver, never silently kept.
    """
    if pair.status != "verified":
        raise PreconditionError(f"pair {pair.pair_id} is {pair.status}, not verified")
    prompt = ps.templates.render("forge", target_language=ps.target_language,
                                 description=gp.description,
                                 correct=pair.luxembourgish)
    req = make_request(ps.provider, ps.model_id, [("user", prompt)], purpose="forge")
    payload = request_structured(
        client, req, shape='{"incorrect": "...", "edit_summary": "..."}',
        validate=_validate_minimal, retries=ps.parse_retries)
    incorrect = " ".join(payload["incorrect"].split())
    if normalize_text(incorrect) == normalize_text(pair.luxembourgish):
        raise DegenerateContrast(f"pair {pair.pair_id}: incorrect sentence equals "
                                 "the correct one")
    return MinimalPair(
        mp_id=stable_id("mp", gp.gp_id, pair.luxembourgish, incorrect),
        gp_id=gp.gp_id, correct=pair.luxembourgish, incorrect=incorrect,
        edit_summary=str(payload.get("edit_summary", "")),
        edit_distance=levenshtein(pair.luxembourgish, incorrect))


# --- corpus drivers ---

def _parallel(fn, items, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def backcheck_corpus(pairs: list[ExamplePair], points: dict[str, GrammarPoint],
                     client: LlmClient, ps: PromptSettings,
                     workers: int = 1) -> list[BackcheckVerdict]:
    todo = [p for p in pairs if p.status == "unchecked"]

    def one(pair):
        return backcheck_pair(pair, points[pair.gp_ids[0]], client, ps)

    return _parallel(one, todo, workers)


def forge_corpus(verified: list[ExamplePair], points: dict[str, GrammarPoint],
                 client: LlmClient, ps: PromptSettings,
                 workers: int = 1) -> list[MinimalPair]:
    def one(pair):
        try:
            return forge_minimal_pair(pair, points[pair.gp_ids[0]], client, ps)
        except (DegenerateContrast, UnparseableReply) as e:
            log.warning("forge: dropping pair %s: %s", pair.pair_id, e)
            return None

    return [mp for mp in _parallel(one, verified, workers) if mp is not None]
