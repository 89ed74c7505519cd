"""Grammar-point mining and controlled example-pair generation.

Grammar chapters are sliced into overlapping sentence windows (so no rule
falls between window edges) and table rows are paired with nearby prose
context. An LLM summarizes the grammatical phenomena of each unit; the
resulting points are deduplicated by token-set similarity and then drive
generation of length-controlled bilingual example pairs.
"""

from __future__ import annotations

import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .config import DEFAULT_ABBREVIATIONS, AtelierConfig, Config
from .errors import PreconditionError, UnparseableReply
from .hashio import grammar_point_id, normalize_text, stable_id
from .inspector import Chapter, DocTable, SourceDocument
from .llm import LlmClient, make_request
from .prompts import TemplateSet
from .replies import request_structured

log = logging.getLogger(__name__)

PAIR_STATUSES = ("unchecked", "verified", "rejected")


@dataclass(frozen=True)
class TextWindow:
    window_id: str
    chapter_id: str
    sentences: tuple[str, ...]
    span: tuple[int, int]              # [first, last] sentence index, inclusive

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


@dataclass(frozen=True)
class RowContext:
    table_id: str
    row_index: int
    row_cells: tuple[str, ...]
    context_before: str
    context_after: str
    header: tuple[str, ...] | None = None
    chapter_id: str = ""


@dataclass(frozen=True)
class Provenance:
    unit_kind: str                     # "window" | "row"
    chapter_id: str = ""
    window_id: str = ""
    table_id: str = ""
    row_index: int = -1

    def to_record(self) -> dict:
        if self.unit_kind == "window":
            return {"kind": "window", "chapter_id": self.chapter_id,
                    "window_id": self.window_id}
        return {"kind": "row", "table_id": self.table_id,
                "row_index": self.row_index, "chapter_id": self.chapter_id}

    @classmethod
    def from_record(cls, rec: dict) -> "Provenance":
        if rec["kind"] == "window":
            return cls("window", chapter_id=rec["chapter_id"],
                       window_id=rec["window_id"])
        return cls("row", chapter_id=rec.get("chapter_id", ""),
                   table_id=rec["table_id"], row_index=rec["row_index"])


@dataclass(frozen=True)
class GrammarPoint:
    gp_id: str
    description: str
    source: tuple[Provenance, ...]
    tags: tuple[str, ...] = ()

    def to_record(self) -> dict:
        return {"gp_id": self.gp_id, "description": self.description,
                "source": [p.to_record() for p in self.source],
                "tags": list(self.tags)}

    @classmethod
    def from_record(cls, rec: dict) -> "GrammarPoint":
        return cls(gp_id=rec["gp_id"], description=rec["description"],
                   source=tuple(Provenance.from_record(p) for p in rec["source"]),
                   tags=tuple(rec.get("tags", ())))


@dataclass(frozen=True)
class ExamplePair:
    pair_id: str
    gp_ids: tuple[str, ...]
    english: str
    luxembourgish: str
    target_length: int                 # requested English word-count target
    status: str = "unchecked"
    flags: tuple[str, ...] = ()

    def to_record(self) -> dict:
        return {"pair_id": self.pair_id, "gp_ids": list(self.gp_ids),
                "english": self.english, "luxembourgish": self.luxembourgish,
                "target_length": self.target_length, "status": self.status,
                "flags": list(self.flags)}

    @classmethod
    def from_record(cls, rec: dict) -> "ExamplePair":
        return cls(pair_id=rec["pair_id"], gp_ids=tuple(rec["gp_ids"]),
                   english=rec["english"], luxembourgish=rec["luxembourgish"],
                   target_length=rec["target_length"], status=rec["status"],
                   flags=tuple(rec.get("flags", ())))


# --- sentence segmentation ---

_CLOSERS = "\"'»«”’)]"
_TERMINALS = ".!?"


def split_sentences(text: str,
                    abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS) -> list[str]:
    """Rule-based sentence splitting on terminal punctuation.

    A boundary is a run of ``.!?`` (plus closing quotes/brackets) followed by
    whitespace or end of text, unless the token ending there is a guarded
    abbreviation. Joining the output reproduces the input modulo whitespace.
    """
    guards = {a.casefold() for a in abbreviations}
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in _TERMINALS:
            j = i + 1
            while j < n and text[j] in _TERMINALS + _CLOSERS:
                j += 1
            if j >= n or text[j].isspace():
                wstart = i
                while wstart > start and not text[wstart - 1].isspace():
                    wstart -= 1
                word = text[wstart:j].casefold()
                if word not in guards:
                    sentence = text[start:j].strip()
                    if sentence:
                        sentences.append(sentence)
                    start = j
            i = j
        else:
            i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


# --- windowing ---

def slide_windows(sentences: list[str], chapter_id: str,
                  window: int, stride: int) -> list[TextWindow]:
    """Overlapping sentence windows covering every sentence at least once.

    Window count is ``ceil(max(0, n - window) / stride) + 1``; consecutive
    full windows overlap by ``window - stride`` sentences.
    """
    if window < 1 or not 1 <= stride <= window:
        raise ValueError("need window >= 1 and 1 <= stride <= window")
    n = len(sentences)
    if n == 0:
        raise PreconditionError(f"chapter {chapter_id} has no sentences")
    count = math.ceil(max(0, n - window) / stride) + 1
    out = []
    for k in range(count):
        lo = k * stride
        hi = min(n, lo + window)
        out.append(TextWindow(window_id=f"{chapter_id}-w{k:03d}",
                              chapter_id=chapter_id,
                              sentences=tuple(sentences[lo:hi]),
                              span=(lo, hi - 1)))
    return out


def chapter_windows(doc: SourceDocument, chapter: Chapter,
                    cfg: AtelierConfig,
                    abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS) -> list[TextWindow]:
    sentences = split_sentences(chapter.body_text(doc), abbreviations)
    if not sentences:
        return []
    return slide_windows(sentences, chapter.chapter_id, cfg.window_size, cfg.stride)


# --- table row contexts ---

def _take_sentences(sentences: list[str], budget: int, from_end: bool) -> str:
    """Greedy whole-sentence prefix/suffix not exceeding ``budget`` chars."""
    picked: list[str] = []
    total = 0
    ordered = reversed(sentences) if from_end else iter(sentences)
    for s in ordered:
        extra = len(s) + (1 if picked else 0)
        if total + extra > budget:
            break
        picked.append(s)
        total += extra
    if from_end:
        picked.reverse()
    return " ".join(picked)


def row_contexts(table: DocTable, doc: SourceDocument, budget: int,
                 abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS,
                 chapter_id: str = "") -> list[RowContext]:
    """One context-carrying unit per table row.

    The anchor block marks the table's slot in reading order: context is
    drawn from the blocks strictly before and strictly after it, truncated
    at sentence boundaries to the character budget. A table anchored at the
    document start therefore has an empty leading context.
    """
    if not any(t.table_id == table.table_id for t in doc.tables):
        raise PreconditionError(f"table {table.table_id} does not belong to "
                                f"document {doc.doc_id}")
    before_text = " ".join(b.text for b in doc.blocks[:table.anchor_block])
    after_text = " ".join(b.text for b in doc.blocks[table.anchor_block + 1:])
    before = _take_sentences(split_sentences(before_text, abbreviations),
                             budget, from_end=True)
    after = _take_sentences(split_sentences(after_text, abbreviations),
                            budget, from_end=False)
    return [RowContext(table_id=table.table_id, row_index=i, row_cells=row,
                       context_before=before, context_after=after,
                       header=table.header, chapter_id=chapter_id)
            for i, row in enumerate(table.rows)]


# --- LLM-driven extraction ---

@dataclass(frozen=True)
class PromptSettings:
    """Where extraction/generation prompts go and how replies are parsed."""
    provider: str
    model_id: str
    templates: TemplateSet
    source_language: str = "English"
    target_language: str = "Luxembourgish"
    parse_retries: int = 3
    chapter_titles: dict | None = None  # chapter_id -> title, for row prompts


def _unit_prompt(unit: TextWindow | RowContext, ps: PromptSettings) -> str:
    titles = ps.chapter_titles or {}
    if isinstance(unit, TextWindow):
        return ps.templates.render(
            "extract_window", target_language=ps.target_language,
            chapter_title=titles.get(unit.chapter_id, unit.chapter_id),
            window_text=unit.text)
    return ps.templates.render(
        "extract_row", target_language=ps.target_language,
        chapter_title=titles.get(unit.chapter_id, unit.chapter_id),
        context_before=unit.context_before or "(none)",
        table_header=" | ".join(unit.header) if unit.header else "(none)",
        row_cells=" | ".join(unit.row_cells),
        context_after=unit.context_after or "(none)")


def _unit_provenance(unit: TextWindow | RowContext) -> Provenance:
    if isinstance(unit, TextWindow):
        return Provenance("window", chapter_id=unit.chapter_id,
                          window_id=unit.window_id)
    return Provenance("row", chapter_id=unit.chapter_id,
                      table_id=unit.table_id, row_index=unit.row_index)


def _validate_point_list(payload) -> list[dict]:
    if not isinstance(payload, list):
        raise ValueError("expected a JSON array of grammar points")
    return payload


def extract_grammar_points(unit: TextWindow | RowContext, client: LlmClient,
                           ps: PromptSettings) -> list[GrammarPoint]:
    """Ask the model for the grammar points conveyed by one unit.

    Invalid list items are logged and dropped (partial salvage); a reply
    whose overall shape never parses raises :class:`UnparseableReply` and the
    caller skips the unit. Zero points is a legal outcome.
    """
    req = make_request(ps.provider, ps.model_id,
                       [("user", _unit_prompt(unit, ps))], purpose="extract")
    items = request_structured(
        client, req, shape='an array of {"description": "...", "tags": [...]} objects',
        validate=_validate_point_list, retries=ps.parse_retries)
    prov = _unit_provenance(unit)
    points = []
    for item in items:
        desc = item.get("description") if isinstance(item, dict) else None
        if not isinstance(desc, str) or not desc.strip():
            log.warning("extract: dropping malformed item from %s", prov.to_record())
            continue
        desc = " ".join(desc.split())
        tags = tuple(t for t in item.get("tags", ()) if isinstance(t, str))
        points.append(GrammarPoint(gp_id=grammar_point_id(desc),
                                   description=desc, source=(prov,), tags=tags))
    return points


# --- dedup ---

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def _token_set(description: str) -> frozenset[str]:
    return frozenset(_TOKEN_RE.findall(normalize_text(description)))


def dedupe_points(points: list[GrammarPoint], threshold: float = 0.7) -> list[GrammarPoint]:
    """Greedy first-wins clustering by token-set Jaccard similarity.

    A point joins the first earlier survivor with similarity >= threshold;
    survivors keep merged provenance and tag unions. Output order is
    first-occurrence order, and the operation is idempotent because
    survivors are pairwise below the threshold.
    """
    survivors: list[GrammarPoint] = []
    token_sets: list[frozenset[str]] = []
    for point in points:
        tokens = _token_set(point.description)
        merged = False
        for idx, seen in enumerate(token_sets):
            union = len(tokens | seen)
            jaccard = len(tokens & seen) / union if union else 1.0
            if jaccard >= threshold:
                keeper = survivors[idx]
                extra_src = tuple(p for p in point.source if p not in keeper.source)
                extra_tags = tuple(t for t in point.tags if t not in keeper.tags)
                survivors[idx] = replace(keeper, source=keeper.source + extra_src,
                                         tags=keeper.tags + extra_tags)
                merged = True
                break
        if not merged:
            survivors.append(point)
            token_sets.append(tokens)
    return survivors


# --- pair generation ---

def _validate_pair_list(payload) -> list[dict]:
    if not isinstance(payload, list):
        raise ValueError("expected a JSON array of sentence pairs")
    return payload


def generate_pairs(gp: GrammarPoint, client: LlmClient, count: int,
                   length_ctrl: tuple[int, int], ps: PromptSettings) -> list[ExamplePair]:
    """Generate up to ``count`` unchecked bilingual pairs for one point.

    English length is requested in the prompt and validated post hoc: out-of-
    band pairs are flagged ``length_violation`` but kept. Malformed list
    items are logged and dropped.
    """
    if count < 1:
        raise PreconditionError("count must be >= 1")
    min_words, max_words = length_ctrl
    if min_words > max_words:
        raise PreconditionError("length control needs min <= max")
    target = (min_words + max_words) // 2
    prompt = ps.templates.render(
        "generate", target_language=ps.target_language,
        source_language=ps.source_language, description=gp.description,
        count=count, min_words=min_words, max_words=max_words,
        target_words=target)
    req = make_request(ps.provider, ps.model_id, [("user", prompt)],
                       purpose="generate")
    items = request_structured(
        client, req, shape='an array of {"english": "...", "luxembourgish": "..."} objects',
        validate=_validate_pair_list, retries=ps.parse_retries)
    pairs: list[ExamplePair] = []
    for item in items:
        if len(pairs) == count:
            break
        english = item.get("english") if isinstance(item, dict) else None
        lux = item.get("luxembourgish") if isinstance(item, dict) else None
        if not (isinstance(english, str) and english.strip()
                and isinstance(lux, str) and lux.strip()):
            log.warning("generate: dropping malformed pair item for %s", gp.gp_id)
            continue
        english = " ".join(english.split())
        lux = " ".join(lux.split())
        words = len(english.split())
        flags = () if min_words <= words <= max_words else ("length_violation",)
        pairs.append(ExamplePair(
            pair_id=stable_id("pr", gp.gp_id, english, lux),
            gp_ids=(gp.gp_id,), english=english, luxembourgish=lux,
            target_length=target, status="unchecked", flags=flags))
    return pairs


# --- corpus drivers (bounded parallel, deterministic merge order) ---

def _parallel(fn, items, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def extraction_units(doc: SourceDocument, chapters: list[Chapter],
                     cfg: Config) -> list[TextWindow | RowContext]:
    """All units of the given chapters: windows first, then table rows."""
    units: list[TextWindow | RowContext] = []
    for chapter in chapters:
        units.extend(chapter_windows(doc, chapter, cfg.atelier, cfg.abbreviations))
        lo, hi = chapter.block_range
        for table in doc.tables:
            if lo <= table.anchor_block < hi:
                units.extend(row_contexts(table, doc, cfg.atelier.context_budget,
                                          cfg.abbreviations, chapter.chapter_id))
    return units


def extract_corpus(doc: SourceDocument, chapters: list[Chapter],
                   client: LlmClient, cfg: Config, ps: PromptSettings,
                   workers: int = 1) -> list[GrammarPoint]:
    """Extract raw (pre-dedup) points from every unit; unparseable units are
    skipped and logged, never fabricated."""
    units = extraction_units(doc, chapters, cfg)

    def one(unit):
        try:
            return extract_grammar_points(unit, client, ps)
        except UnparseableReply as e:
            log.warning("extract: skipping unit %s: %s",
                        _unit_provenance(unit).to_record(), e)
            return []

    merged: list[GrammarPoint] = []
    for batch in _parallel(one, units, workers):
        merged.extend(batch)
    return merged


def generate_corpus(points: list[GrammarPoint], client: LlmClient,
                    cfg: Config, ps: PromptSettings,
                    workers: int = 1) -> list[ExamplePair]:
    a = cfg.atelier

    def one(gp):
        try:
            return generate_pairs(gp, client, a.pairs_per_point,
                                  (a.min_words, a.max_words), ps)
        except UnparseableReply as e:
            log.warning("generate: skipping point %s: %s", gp.gp_id, e)
            return []

    merged: list[ExamplePair] = []
    for batch in _parallel(one, points, workers):
        merged.extend(batch)
    return merged
