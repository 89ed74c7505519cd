"""Interchange parsing, chapter segmentation, and section selection."""

from __future__ import annotations

import json

import pytest

from grammarprobe.config import DEFAULT_SECTION_KEYWORDS
from grammarprobe.errors import EmptyDocument, MalformedInterchange, NoGrammarSections
from grammarprobe.fixtures import FixtureSet
from grammarprobe.inspector import (
    classify_sections,
    document_from_dict,
    grammar_sections,
    parse_interchange,
    segment_chapters,
    serialize_document,
)


def doc_dict(blocks, tables=None, doc_id="doc"):
    return {"doc_id": doc_id, "metadata": {},
            "blocks": blocks, "tables": tables or []}


def block(text="Some text here.", font=10.0, page=0):
    return {"page": page, "font_size": font, "text": text}


def write_doc(tmp_path, payload):
    path = tmp_path / "doc.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_minimal_document(tmp_path):
    doc = parse_interchange(write_doc(tmp_path, doc_dict([block()])))
    assert len(doc.blocks) == 1
    assert doc.blocks[0].block_index == 0
    assert not doc.tables


def test_bundled_fixture_counts():
    doc = parse_interchange(FixtureSet.locate().mini_book)
    assert len(doc.blocks) == 12
    assert len(doc.tables) == 2


def test_mismatched_table_arity(tmp_path):
    payload = doc_dict([block()], tables=[{
        "table_id": "t", "anchor_block": 0,
        "rows": [["a", "b"], ["c"]]}])
    with pytest.raises(MalformedInterchange) as err:
        parse_interchange(write_doc(tmp_path, payload))
    assert "tables[0].rows[1]" in str(err.value)


def test_empty_document(tmp_path):
    with pytest.raises(EmptyDocument):
        parse_interchange(write_doc(tmp_path, doc_dict([])))


@pytest.mark.parametrize("field,value,where", [
    ("page", -1, "blocks[0].page"),
    ("font_size", 0, "blocks[0].font_size"),
    ("text", "   ", "blocks[0].text"),
])
def test_bad_block_fields(tmp_path, field, value, where):
    b = block()
    b[field] = value
    with pytest.raises(MalformedInterchange) as err:
        parse_interchange(write_doc(tmp_path, doc_dict([b])))
    assert err.value.path == where


def test_anchor_out_of_range(tmp_path):
    payload = doc_dict([block()], tables=[{
        "table_id": "t", "anchor_block": 5, "rows": [["x"]]}])
    with pytest.raises(MalformedInterchange) as err:
        parse_interchange(write_doc(tmp_path, payload))
    assert "anchor_block" in str(err.value)


def test_round_trip_identity(tmp_path):
    doc = parse_interchange(FixtureSet.locate().mini_book)
    again = document_from_dict(serialize_document(doc))
    assert again == doc


def test_uniform_fonts_single_chapter():
    doc = document_from_dict(doc_dict([block(f"Text {i}.") for i in range(5)]))
    chapters = segment_chapters(doc, 1.5)
    assert len(chapters) == 1
    assert chapters[0].title == "front-matter"
    assert chapters[0].block_range == (0, 5)
    assert chapters[0].section_kind == "other"


def test_heading_trace():
    # fonts [18,10,10,18,10] at ratio 1.5 -> headings at 0 and 3
    fonts = [18, 10, 10, 18, 10]
    doc = document_from_dict(doc_dict(
        [block(f"Block {i}.", font=f) for i, f in enumerate(fonts)]))
    chapters = segment_chapters(doc, 1.5)
    assert len(chapters) == 2
    assert chapters[0].block_range == (0, 3)
    assert chapters[1].block_range == (3, 5)
    assert len(chapters[0].body_blocks(doc)) == 2
    assert len(chapters[1].body_blocks(doc)) == 1


def test_trailing_heading_kept():
    doc = document_from_dict(doc_dict([block("Body.", font=10),
                                       block("Trailing Heading", font=20)]))
    chapters = segment_chapters(doc, 1.3)
    assert len(chapters) == 2
    assert chapters[-1].block_range == (1, 2)
    assert chapters[-1].body_blocks(doc) == []


def test_partition_and_monotonicity():
    fonts = [18, 10, 14, 18, 10, 10, 22, 10]
    doc = document_from_dict(doc_dict(
        [block(f"Block {i}.", font=f) for i, f in enumerate(fonts)]))
    previous = None
    for ratio in (1.0, 1.1, 1.3, 1.5, 1.8, 2.5):
        chapters = segment_chapters(doc, ratio)
        covered = []
        for ch in chapters:
            covered.extend(range(*ch.block_range))
        assert covered == list(range(len(fonts)))  # disjoint ordered cover
        if previous is not None:
            assert len(chapters) <= previous
        previous = len(chapters)


def test_segmentation_idempotent():
    doc = parse_interchange(FixtureSet.locate().mini_book)
    first = segment_chapters(doc, 1.25)
    second = segment_chapters(doc, 1.25)
    assert first == second


@pytest.mark.parametrize("title,expected", [
    ("Verb Morphology", "morphology"),
    ("Word Order and Clauses", "syntax"),
    ("Bibliography", "other"),
    ("THE LEXICON OF TRADE", "lexicon"),
    ("Pronunciation Guide", "phonology"),
])
def test_classify_titles(title, expected):
    doc = document_from_dict(doc_dict([block(title, font=20), block("Body.")]))
    chapters = segment_chapters(doc, 1.2)
    classified = classify_sections(chapters, DEFAULT_SECTION_KEYWORDS)
    assert classified[0].section_kind == expected


def test_grammar_sections_filter_and_order():
    doc = document_from_dict(doc_dict([
        block("Clause Syntax", font=20), block("Body one."),
        block("The Lexicon", font=20), block("Body two."),
        block("Noun Morphology", font=20), block("Body three."),
    ]))
    chapters = classify_sections(segment_chapters(doc, 1.2),
                                 DEFAULT_SECTION_KEYWORDS)
    kinds = [c.section_kind for c in chapters]
    assert kinds == ["syntax", "lexicon", "morphology"]
    selected = grammar_sections(chapters)
    assert [c.section_kind for c in selected] == ["syntax", "morphology"]
    widened = grammar_sections(chapters, extra_kinds=("lexicon",))
    assert len(widened) == 3


def test_no_grammar_sections_lists_titles():
    doc = document_from_dict(doc_dict([block("Bibliography", font=20),
                                       block("Body.")]))
    chapters = classify_sections(segment_chapters(doc, 1.2),
                                 DEFAULT_SECTION_KEYWORDS)
    with pytest.raises(NoGrammarSections) as err:
        grammar_sections(chapters)
    assert "Bibliography" in str(err.value)
