"""Grammar-document ingestion: interchange parsing and chapter structure.

The pipeline does not read PDFs. An upstream converter produces a neutral
document-interchange JSON file (schema in ``docs/interchange.md``); this
module validates it, segments the block stream into chapters with a
font-size heuristic, and selects the grammar-bearing sections.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import EmptyDocument, MalformedInterchange, NoGrammarSections

SECTION_KINDS = ("syntax", "morphology", "lexicon", "phonology", "other")
GRAMMAR_KINDS = ("syntax", "morphology")


@dataclass(frozen=True)
class TextBlock:
    page: int
    font_size: float
    text: str
    block_index: int


@dataclass(frozen=True)
class DocTable:
    table_id: str
    anchor_block: int
    rows: tuple[tuple[str, ...], ...]
    header: tuple[str, ...] | None = None


@dataclass(frozen=True)
class SourceDocument:
    doc_id: str
    blocks: tuple[TextBlock, ...]
    tables: tuple[DocTable, ...]
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Chapter:
    chapter_id: str
    title: str
    block_range: tuple[int, int]       # [start, end) into doc.blocks
    section_kind: str = "other"
    heading_block: int | None = None   # None for the implicit front-matter chapter

    def body_blocks(self, doc: SourceDocument) -> list[TextBlock]:
        start, end = self.block_range
        if self.heading_block is not None:
            start = self.heading_block + 1
        return list(doc.blocks[start:end])

    def body_text(self, doc: SourceDocument) -> str:
        return " ".join(b.text for b in self.body_blocks(doc))


def _expect(cond: bool, path: str, detail: str) -> None:
    if not cond:
        raise MalformedInterchange(path, detail)


def parse_interchange(path: str | Path) -> SourceDocument:
    """Parse and validate a document-interchange file.

    Raises :class:`MalformedInterchange` with the path of the offending field
    on any schema violation, and :class:`EmptyDocument` for zero blocks.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise MalformedInterchange("$", f"not valid JSON: {e}") from e
    return document_from_dict(raw)


def document_from_dict(raw) -> SourceDocument:
    _expect(isinstance(raw, dict), "$", "top level must be an object")
    _expect(isinstance(raw.get("doc_id"), str) and raw["doc_id"], "doc_id",
            "required non-empty string")
    metadata = raw.get("metadata", {})
    _expect(isinstance(metadata, dict), "metadata", "must be an object")
    for k, v in metadata.items():
        _expect(isinstance(v, str), f"metadata.{k}", "values must be strings")

    raw_blocks = raw.get("blocks")
    _expect(isinstance(raw_blocks, list), "blocks", "required array")
    if not raw_blocks:
        raise EmptyDocument(f"{raw['doc_id']}: document has zero blocks")

    blocks = []
    for i, rb in enumerate(raw_blocks):
        where = f"blocks[{i}]"
        _expect(isinstance(rb, dict), where, "must be an object")
        page = rb.get("page")
        _expect(isinstance(page, int) and page >= 0, f"{where}.page",
                "required integer >= 0")
        font = rb.get("font_size")
        _expect(isinstance(font, (int, float)) and font > 0, f"{where}.font_size",
                "required positive number")
        text = rb.get("text")
        _expect(isinstance(text, str) and text.strip(), f"{where}.text",
                "required non-empty string")
        blocks.append(TextBlock(page=page, font_size=float(font),
                                text=" ".join(text.split()), block_index=i))

    raw_tables = raw.get("tables", [])
    _expect(isinstance(raw_tables, list), "tables", "must be an array")
    tables = []
    for t, rt in enumerate(raw_tables):
        where = f"tables[{t}]"
        _expect(isinstance(rt, dict), where, "must be an object")
        table_id = rt.get("table_id")
        _expect(isinstance(table_id, str) and table_id, f"{where}.table_id",
                "required non-empty string")
        anchor = rt.get("anchor_block")
        _expect(isinstance(anchor, int) and 0 <= anchor < len(blocks),
                f"{where}.anchor_block",
                f"must index into blocks (0..{len(blocks) - 1})")
        rows = rt.get("rows")
        _expect(isinstance(rows, list) and rows, f"{where}.rows",
                "required non-empty array")
        arity = None
        clean_rows = []
        for r, row in enumerate(rows):
            _expect(isinstance(row, list) and row, f"{where}.rows[{r}]",
                    "must be a non-empty array of cell strings")
            _expect(all(isinstance(c, str) for c in row), f"{where}.rows[{r}]",
                    "cells must be strings")
            if arity is None:
                arity = len(row)
            _expect(len(row) == arity, f"{where}.rows[{r}]",
                    f"arity {len(row)} != first row arity {arity}")
            clean_rows.append(tuple(row))
        header = rt.get("header")
        if header is not None:
            _expect(isinstance(header, list) and all(isinstance(c, str) for c in header),
                    f"{where}.header", "must be an array of strings")
            _expect(len(header) == arity, f"{where}.header",
                    f"arity {len(header)} != row arity {arity}")
            header = tuple(header)
        tables.append(DocTable(table_id=table_id, anchor_block=anchor,
                               rows=tuple(clean_rows), header=header))

    return SourceDocument(doc_id=raw["doc_id"], blocks=tuple(blocks),
                          tables=tuple(tables), metadata=dict(metadata))


def serialize_document(doc: SourceDocument) -> dict:
    """Interchange-shaped dict; ``parse_interchange`` of its dump round-trips."""
    out: dict = {
        "doc_id": doc.doc_id,
        "metadata": dict(doc.metadata),
        "blocks": [{"page": b.page, "font_size": b.font_size, "text": b.text}
                   for b in doc.blocks],
        "tables": [],
    }
    for t in doc.tables:
        entry: dict = {"table_id": t.table_id, "anchor_block": t.anchor_block,
                       "rows": [list(r) for r in t.rows]}
        if t.header is not None:
            entry["header"] = list(t.header)
        out["tables"].append(entry)
    return out


def segment_chapters(doc: SourceDocument, heading_ratio: float = 1.25) -> list[Chapter]:
    """Split the block stream into chapters by font-size heuristic.

    A block is a heading iff its font size is at least ``heading_ratio``
    times the median block font size. Body blocks attach to the nearest
    preceding heading; anything before the first heading becomes an implicit
    front-matter chapter. Raising the ratio can only shrink the heading set,
    so the chapter count is monotone non-increasing in the ratio.
    """
    if heading_ratio <= 0:
        raise ValueError("heading_ratio must be positive")
    median = statistics.median(b.font_size for b in doc.blocks)
    threshold = heading_ratio * median
    headings = [b.block_index for b in doc.blocks if b.font_size >= threshold]

    chapters: list[Chapter] = []
    n = len(doc.blocks)
    if not headings or headings[0] > 0:
        end = headings[0] if headings else n
        chapters.append(Chapter(chapter_id="ch000", title="front-matter",
                                block_range=(0, end), section_kind="other",
                                heading_block=None))
    for k, h in enumerate(headings):
        end = headings[k + 1] if k + 1 < len(headings) else n
        chapters.append(Chapter(chapter_id=f"ch{len(chapters):03d}",
                                title=doc.blocks[h].text,
                                block_range=(h, end),
                                heading_block=h))
    return chapters


def classify_sections(chapters: list[Chapter],
                      keyword_map: tuple[tuple[str, tuple[str, ...]], ...]) -> list[Chapter]:
    """Assign a section kind to each chapter by title keyword.

    Kinds are tried in declared map order and the first kind with a matching
    keyword wins; titles matching nothing stay ``other``.
    """
    if not chapters:
        raise ValueError("classify_sections requires at least one chapter")
    out = []
    for ch in chapters:
        title = ch.title.casefold()
        kind = "other"
        for candidate, keywords in keyword_map:
            if any(kw.casefold() in title for kw in keywords):
                kind = candidate
                break
        out.append(replace(ch, section_kind=kind))
    return out


def grammar_sections(chapters: list[Chapter],
                     extra_kinds: tuple[str, ...] = ()) -> list[Chapter]:
    """Chapters relevant to extraction: syntax and morphology, original order.

    ``extra_kinds`` widens the filter (e.g. ``("lexicon",)`` when lexicon
    sections should feed extraction too).
    """
    wanted = set(GRAMMAR_KINDS) | set(extra_kinds)
    selected = [ch for ch in chapters if ch.section_kind in wanted]
    if not selected:
        titles = ", ".join(repr(ch.title) for ch in chapters)
        raise NoGrammarSections(
            "no syntax or morphology chapters found; the section keyword map "
            f"likely needs tuning. Titles seen: {titles}")
    return selected
