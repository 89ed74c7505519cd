"""Translation-quality metrics and elicitation.

chrF++ and BLEU are implemented natively as pure functions so scores are
bit-reproducible across platforms. BLEU runs over pluggable subword
tokenization (a ranked-vocabulary greedy tokenizer), which is what makes it
robust for morphologically rich text. Neural quality estimation is *not*
reimplemented here: external scores enter through a per-segment file
contract produced by the standalone scorer bridge.
"""

from __future__ import annotations

import logging
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    AlignmentMismatch,
    EmptyReference,
    PreconditionError,
    UnparseableReply,
    VocabMissing,
)
from .llm import LlmClient, make_request
from .replies import request_structured

log = logging.getLogger(__name__)

METRIC_SCALES: dict[str, tuple[float, float]] = {
    "chrfpp": (0.0, 100.0),
    "bleu": (0.0, 100.0),
    "judge": (0.0, 10.0),
    "external": (0.0, 1.0),
}


@dataclass(frozen=True)
class MetricScore:
    metric: str
    value: float
    segment_id: str

    def __post_init__(self):
        lo, hi = METRIC_SCALES[self.metric]
        if not lo <= self.value <= hi:
            raise ValueError(f"{self.metric} score {self.value} outside [{lo}, {hi}]")

    def to_record(self) -> dict:
        return {"segment_id": self.segment_id, "metric": self.metric,
                "value": self.value}


@dataclass(frozen=True)
class NGramProfile:
    """Multiset of the n-grams of one sequence at one order."""
    order: int
    counts: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def ngram_profile(seq: Sequence, order: int) -> NGramProfile:
    if order < 1:
        raise ValueError("order must be >= 1")
    counts = Counter(tuple(seq[i:i + order]) for i in range(len(seq) - order + 1))
    return NGramProfile(order=order, counts=counts)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def split_words(text: str) -> list[str]:
    """Whitespace tokenization with punctuation characters as own tokens."""
    out: list[str] = []
    word: list[str] = []
    for ch in text:
        if ch.isspace() or _is_punct(ch):
            if word:
                out.append("".join(word))
                word = []
            if _is_punct(ch):
                out.append(ch)
        else:
            word.append(ch)
    if word:
        out.append("".join(word))
    return out


def chrf_pp(hypothesis: str, reference: str, char_order: int = 6,
            word_order: int = 2, beta: float = 2.0) -> float:
    """Character+word n-gram F-score on a 0-100 scale.

    Precision and recall are averaged uniformly over all contributing
    orders: character n-grams 1..char_order on whitespace-stripped text plus
    word n-grams 1..word_order on punctuation-split tokens. An order
    contributes only when both sides have at least one n-gram of that order
    (this is what makes the identity score exactly 100 for short inputs).
    F_beta then weighs recall beta^2 times as much as precision.
    """
    if not reference.strip():
        raise EmptyReference("chrf_pp needs a non-empty reference")
    if not hypothesis.strip():
        return 0.0

    hyp_chars = "".join(hypothesis.split())
    ref_chars = "".join(reference.split())
    hyp_words = split_words(hypothesis)
    ref_words = split_words(reference)

    precisions: list[float] = []
    recalls: list[float] = []
    layers: list[tuple[Sequence, Sequence, int]] = (
        [(hyp_chars, ref_chars, n) for n in range(1, char_order + 1)]
        + [(hyp_words, ref_words, n) for n in range(1, word_order + 1)])
    for hyp_seq, ref_seq, n in layers:
        hyp_prof = ngram_profile(hyp_seq, n)
        ref_prof = ngram_profile(ref_seq, n)
        if hyp_prof.total == 0 or ref_prof.total == 0:
            continue
        matches = sum((hyp_prof.counts & ref_prof.counts).values())
        precisions.append(matches / hyp_prof.total)
        recalls.append(matches / ref_prof.total)

    if not precisions:
        return 0.0
    avg_p = sum(precisions) / len(precisions)
    avg_r = sum(recalls) / len(recalls)
    denom = beta * beta * avg_p + avg_r
    if denom == 0.0:
        return 0.0
    return 100.0 * (1 + beta * beta) * avg_p * avg_r / denom


SMOOTHINGS = ("exp", "none")


def bleu(hyp_tokens: Sequence[str], ref_tokens: Sequence[str],
         max_order: int = 4, smoothing: str = "exp") -> float:
    """Sentence BLEU on a 0-100 scale.

    Geometric mean of modified (clipped-count) n-gram precisions over the
    effective orders (those where the hypothesis has n-grams), times the
    brevity penalty exp(1 - r/h) when the hypothesis is shorter than the
    reference. With ``exp`` smoothing the k-th zero-match order gets
    precision 1/(2^k * total); with ``none`` any zero precision zeroes the
    score.
    """
    if smoothing not in SMOOTHINGS:
        raise ValueError(f"unknown smoothing {smoothing!r}")
    if not ref_tokens:
        raise EmptyReference("bleu needs a non-empty reference")
    if not hyp_tokens:
        return 0.0

    log_sum = 0.0
    effective = 0
    smooth_scale = 1.0
    for n in range(1, max_order + 1):
        hyp_prof = ngram_profile(hyp_tokens, n)
        if hyp_prof.total == 0:
            break
        ref_prof = ngram_profile(ref_tokens, n)
        correct = sum((hyp_prof.counts & ref_prof.counts).values())
        effective += 1
        if correct == 0:
            if smoothing == "none":
                return 0.0
            smooth_scale *= 2.0
            precision = 1.0 / (smooth_scale * hyp_prof.total)
        else:
            precision = correct / hyp_prof.total
        log_sum += math.log(precision)

    h, r = len(hyp_tokens), len(ref_tokens)
    brevity = 1.0 if h >= r else math.exp(1.0 - r / h)
    return 100.0 * brevity * math.exp(log_sum / effective)


# --- subword tokenization ---

WORD_MARKER = "▁"  # SentencePiece-style word-boundary marker
UNK_TOKEN = "<unk>"


class SubwordVocab:
    """Ranked subword vocabulary: UTF-8 file, one token per line."""

    def __init__(self, tokens: Iterable[str]):
        self.tokens = [t for t in tokens if t]
        self.ranks = {t: i for i, t in enumerate(self.tokens)}
        if UNK_TOKEN not in self.ranks:
            raise VocabMissing(f"vocabulary lacks the {UNK_TOKEN} marker line")
        self.max_len = max(len(t) for t in self.tokens)

    @classmethod
    def load(cls, path: str | Path) -> "SubwordVocab":
        path = Path(path)
        if not path.exists():
            raise VocabMissing(f"vocabulary file not found: {path}")
        lines = path.read_text(encoding="utf-8").splitlines()
        return cls(lines)

    def __contains__(self, token: str) -> bool:
        return token in self.ranks

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize_subword(text: str, vocab: SubwordVocab) -> list[str]:
    """Greedy longest-match segmentation with word-boundary markers.

    Spaces become the marker character, so detokenization is exact for any
    text over the vocabulary's alphabet. Characters with no vocabulary entry
    yield one unknown token each.
    """
    if not text:
        return []
    marked = WORD_MARKER + text.replace(" ", WORD_MARKER)
    out: list[str] = []
    i = 0
    n = len(marked)
    while i < n:
        match = None
        for length in range(min(vocab.max_len, n - i), 0, -1):
            candidate = marked[i:i + length]
            if candidate in vocab:
                match = candidate
                break
        if match is None:
            out.append(UNK_TOKEN)
            i += 1
        else:
            out.append(match)
            i += len(match)
    return out


def detokenize_subword(tokens: Sequence[str]) -> str:
    text = "".join(tokens).replace(WORD_MARKER, " ")
    return text[1:] if text.startswith(" ") else text


def spbleu(hypothesis: str, reference: str, vocab: SubwordVocab,
           max_order: int = 4, smoothing: str = "exp") -> float:
    if not reference.strip():
        raise EmptyReference("spbleu needs a non-empty reference")
    return bleu(tokenize_subword(hypothesis, vocab),
                tokenize_subword(reference, vocab),
                max_order=max_order, smoothing=smoothing)


# --- elicitation ---

def translate_segment(text: str, client: LlmClient, ps) -> str:
    """One translation; the prompt requests the bare translation as reply."""
    prompt = ps.templates.render("translate", source_language=ps.source_language,
                                 target_language=ps.target_language, text=text)
    req = make_request(ps.provider, ps.model_id, [("user", prompt)],
                       purpose="translate")
    return client.cached_complete(req).strip()


def translate_corpus(segments: list[dict], direction: str, client: LlmClient,
                     ps, done: dict[str, str] | None = None,
                     on_result=None) -> list[dict]:
    """Hypotheses for every segment, resuming over ``done`` ids.

    ``segments`` records need ``segment_id``/``english``/``luxembourgish``;
    direction picks the source side. ``on_result`` (if given) is called with
    each fresh record so callers can persist incrementally.
    """
    if direction not in ("en-lb", "lb-en"):
        raise ValueError(f"direction must be en-lb or lb-en, got {direction!r}")
    source_field = "english" if direction == "en-lb" else "luxembourgish"
    done = dict(done or {})
    out = []
    for seg in segments:
        sid = seg["segment_id"]
        if sid in done:
            out.append({"segment_id": sid, "hypothesis": done[sid]})
            continue
        hyp = translate_segment(seg[source_field], client, ps)
        record = {"segment_id": sid, "hypothesis": hyp}
        out.append(record)
        if on_result is not None:
            on_result(record)
    return out


def _validate_judge(payload) -> float:
    if isinstance(payload, (int, float)) and not isinstance(payload, bool):
        return float(payload)
    if isinstance(payload, dict):
        score = payload.get("score")
        if isinstance(score, (int, float)) and not isinstance(score, bool):
            return float(score)
    raise ValueError("no numeric score in reply")


def judge_translation(source: str, hypothesis: str, reference: str,
                      client: LlmClient, ps) -> float:
    """LLM-as-judge score on the 0-10 scale; out-of-range replies are
    clamped and flagged in the log."""
    prompt = ps.templates.render("judge", target_language=ps.target_language,
                                 source=source, hypothesis=hypothesis,
                                 reference=reference)
    req = make_request(ps.provider, ps.model_id, [("user", prompt)], purpose="judge")
    score = request_structured(client, req,
                               shape='{"score": <number 0-10>, "rationale": "..."}',
                               validate=_validate_judge, retries=ps.parse_retries)
    if not 0.0 <= score <= 10.0:
        log.warning("judge: clamping out-of-range score %.2f", score)
        score = min(10.0, max(0.0, score))
    return score


# --- corpus scoring ---

@dataclass
class CorpusScores:
    rows: list[MetricScore]
    summary: dict[str, dict]           # metric -> {mean, std, n}


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def load_external_scores(path: str | Path) -> dict[str, float]:
    """Scorer-bridge output: one {segment_id, score in [0,1]} JSON per line."""
    import json

    scores: dict[str, float] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "segment_id" not in rec or "score" not in rec:
                raise AlignmentMismatch(
                    f"{path}:{lineno}: expected segment_id and score fields")
            scores[rec["segment_id"]] = float(rec["score"])
    return scores


def score_corpus(hypotheses: dict[str, str], references: dict[str, str],
                 metrics: set[str], *, sources: dict[str, str] | None = None,
                 client: LlmClient | None = None, judge_ps=None,
                 vocab: SubwordVocab | None = None,
                 external_scores: dict[str, float] | None = None) -> CorpusScores:
    """Per-segment scores plus corpus mean +- std for each requested metric.

    Hypotheses and references must be aligned on segment ids. The external
    metric is merged from the scorer-bridge output; requesting it without
    providing that file is an explicit error, never a silent skip.
    """
    unknown = metrics - set(METRIC_SCALES)
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    if set(hypotheses) != set(references):
        missing = set(hypotheses) ^ set(references)
        raise AlignmentMismatch(f"hypothesis/reference segment ids differ: "
                                f"{sorted(missing)[:5]}")
    if "bleu" in metrics and vocab is None:
        raise VocabMissing("bleu requested but no subword vocabulary given")
    if "judge" in metrics and (client is None or judge_ps is None or sources is None):
        raise PreconditionError("judge metric needs sources and an LLM client")
    if "external" in metrics and external_scores is None:
        raise AlignmentMismatch("external metric requested but no external "
                                "score file was provided")

    rows: list[MetricScore] = []
    per_metric: dict[str, list[float]] = {m: [] for m in metrics}
    for sid, hyp in hypotheses.items():
        ref = references[sid]
        if "chrfpp" in metrics:
            value = chrf_pp(hyp, ref)
            rows.append(MetricScore("chrfpp", value, sid))
            per_metric["chrfpp"].append(value)
        if "bleu" in metrics:
            value = spbleu(hyp, ref, vocab)
            rows.append(MetricScore("bleu", value, sid))
            per_metric["bleu"].append(value)
        if "judge" in metrics:
            if sid not in sources:
                raise AlignmentMismatch(f"no source text for segment {sid}")
            value = judge_translation(sources[sid], hyp, ref, client, judge_ps)
            rows.append(MetricScore("judge", value, sid))
            per_metric["judge"].append(value)
        if "external" in metrics:
            if sid not in external_scores:
                raise AlignmentMismatch(f"external score file lacks segment {sid}")
            value = external_scores[sid]
            rows.append(MetricScore("external", value, sid))
            per_metric["external"].append(value)

    summary = {}
    for metric in sorted(metrics):
        values = per_metric[metric]
        if values:
            mean, std = _mean_std(values)
            summary[metric] = {"mean": mean, "std": std, "n": len(values)}
    return CorpusScores(rows=rows, summary=summary)
