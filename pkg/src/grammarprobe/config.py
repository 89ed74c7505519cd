"""Pipeline configuration: shipped defaults plus file/flag overrides.

Values here are the tunables the source material leaves open (window sizes,
keyword tables, thresholds). Everything is overridable via ``--config``
(TOML or JSON) so a run manifest can snapshot the exact configuration.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# Ordered: the first kind whose keyword matches a chapter title wins.
DEFAULT_SECTION_KEYWORDS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("syntax", ("syntax", "word order", "clause", "sentence", "negation",
                "question", "subordina", "relative")),
    ("morphology", ("morphology", "verb", "noun", "article", "adjective",
                    "pronoun", "plural", "conjugation", "declension", "case",
                    "tense", "agreement", "inflection")),
    ("lexicon", ("lexicon", "vocabulary", "word list", "dictionary", "loanword")),
    ("phonology", ("phonology", "pronunciation", "orthography", "spelling",
                   "phonetic", "sound")),
)

# Tokens that end with a period but do not end a sentence.
DEFAULT_ABBREVIATIONS: tuple[str, ...] = (
    "z.b.", "d.h.", "e.g.", "i.e.", "etc.", "vs.", "cf.", "ca.",
    "dr.", "prof.", "nr.", "no.", "vol.", "pp.", "p.", "bzw.", "u.a.",
)


@dataclass(frozen=True)
class AtelierConfig:
    window_size: int = 5
    stride: int = 3
    context_budget: int = 400          # characters per table-context side
    dedupe_threshold: float = 0.7      # token-set Jaccard
    pairs_per_point: int = 4           # generation target per grammar point
    min_words: int = 12                # English length control
    max_words: int = 30
    parse_retries: int = 3


@dataclass(frozen=True)
class ForgePolicy:
    # The rule judgment alone gates by default; the translation score is
    # recorded but its threshold is off (0.0 passes everything).
    require_rule: bool = True
    min_score: float = 0.0


@dataclass(frozen=True)
class TaskDefaults:
    t1_n_grammars: int = 2
    t2_n_sentences: int = 1
    t2_mode: str = "select"            # or "judge": yes/no on a single sentence
    t3_n_grammars: int = 4
    t3_n_sentences: int = 2
    t4_n_candidates: int = 2
    instances: int = 50
    bootstrap_resamples: int = 1000


# Purpose-specific sampling temperature: evaluation-style calls are pinned to
# 0, generative calls get diversity.
DEFAULT_TEMPERATURES: dict[str, float] = {
    "extract": 0.0,
    "generate": 0.7,
    "backcheck": 0.0,
    "forge": 0.7,
    "task": 0.0,
    "translate": 0.0,
    "judge": 0.0,
}


@dataclass(frozen=True)
class Config:
    seed: int = 20401
    heading_ratio: float = 1.25
    include_lexicon: bool = False      # lexicon sections feed extraction when True
    section_keywords: tuple[tuple[str, tuple[str, ...]], ...] = DEFAULT_SECTION_KEYWORDS
    abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS
    atelier: AtelierConfig = field(default_factory=AtelierConfig)
    forge: ForgePolicy = field(default_factory=ForgePolicy)
    tasks: TaskDefaults = field(default_factory=TaskDefaults)
    concurrency: int = 4
    source_language: str = "English"
    target_language: str = "Luxembourgish"
    generator_model: str = "fixture-writer"
    judge_model: str = "fixture-judge"
    provider: str = "fixture"

    def snapshot(self) -> dict:
        """JSON-safe copy for the run manifest."""
        snap = asdict(self)
        snap["section_keywords"] = [[k, list(v)] for k, v in self.section_keywords]
        snap["abbreviations"] = list(self.abbreviations)
        return snap


def _merge(cfg: Config, data: dict) -> Config:
    nested = {"atelier": AtelierConfig, "forge": ForgePolicy, "tasks": TaskDefaults}
    updates: dict = {}
    for key, value in data.items():
        if key in nested:
            updates[key] = replace(getattr(cfg, key), **value)
        elif key == "section_keywords":
            updates[key] = tuple((k, tuple(v)) for k, v in value)
        elif key == "abbreviations":
            updates[key] = tuple(value)
        else:
            updates[key] = value
    return replace(cfg, **updates)


def load_config(path: str | Path | None = None, **overrides) -> Config:
    """Defaults, then the config file, then explicit keyword overrides."""
    cfg = Config()
    if path is not None:
        path = Path(path)
        if path.suffix == ".json":
            data = json.loads(path.read_text(encoding="utf-8"))
        else:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        cfg = _merge(cfg, data)
    if overrides:
        cfg = _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    return cfg
