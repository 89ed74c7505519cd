"""Prompt template loading and rendering.

Templates are plain text files with named ``{placeholder}`` slots. The
shipped set lives in the package's ``prompts/`` directory; a run can point
at an override directory, which is how prompt variants stay versioned files
rather than code edits. Placeholders are validated at load time so a typo in
a template fails fast instead of at render time mid-run.
"""

from __future__ import annotations

import string
from importlib import resources
from pathlib import Path

from .errors import MissingTemplate

# Placeholders each template may use; anything else is a load-time error.
TEMPLATE_FIELDS: dict[str, frozenset[str]] = {
    "extract_window": frozenset({"target_language", "chapter_title", "window_text"}),
    "extract_row": frozenset({"target_language", "chapter_title", "context_before",
                              "table_header", "row_cells", "context_after"}),
    "generate": frozenset({"target_language", "source_language", "description",
                           "count", "min_words", "max_words", "target_words"}),
    "backcheck": frozenset({"target_language", "source_language", "description",
                            "english", "luxembourgish"}),
    "forge": frozenset({"target_language", "description", "correct"}),
    "translate": frozenset({"source_language", "target_language", "text"}),
    "judge": frozenset({"target_language", "source", "hypothesis", "reference"}),
    "task1": frozenset({"stem", "options", "answer_format"}),
    "task2": frozenset({"stem", "options", "answer_format"}),
    "task2_judge": frozenset({"stem", "options", "answer_format"}),
    "task3": frozenset({"stem", "options", "answer_format", "key_count"}),
    "task4": frozenset({"stem", "options", "answer_format"}),
}


def _placeholders(text: str) -> set[str]:
    fields = set()
    for _, name, _, _ in string.Formatter().parse(text):
        if name:
            fields.add(name.split(".")[0].split("[")[0])
    return fields


class TemplateSet:
    """Validated prompt templates, loaded once per run."""

    def __init__(self, texts: dict[str, str]):
        self.texts = texts
        for name, text in texts.items():
            allowed = TEMPLATE_FIELDS.get(name)
            if allowed is None:
                continue  # extra files are permitted, never rendered by us
            unknown = _placeholders(text) - allowed
            if unknown:
                raise MissingTemplate(
                    f"template {name!r} uses unknown placeholder(s): "
                    f"{', '.join(sorted(unknown))}")

    @classmethod
    def load(cls, override_dir: str | Path | None = None) -> "TemplateSet":
        texts: dict[str, str] = {}
        pkg_dir = resources.files("grammarprobe") / "prompts"
        for entry in pkg_dir.iterdir():
            if entry.name.endswith(".txt"):
                texts[entry.name[:-4]] = entry.read_text(encoding="utf-8")
        if override_dir is not None:
            for path in sorted(Path(override_dir).glob("*.txt")):
                texts[path.stem] = path.read_text(encoding="utf-8")
        return cls(texts)

    def render(self, name: str, **fields) -> str:
        if name not in self.texts:
            raise MissingTemplate(f"no template named {name!r}")
        try:
            return self.texts[name].format(**fields)
        except KeyError as e:
            raise MissingTemplate(f"template {name!r} needs field {e}") from None
