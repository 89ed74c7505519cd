"""Config file loading and provider registry parsing."""

from __future__ import annotations

import pytest

from grammarprobe.config import Config, load_config
from grammarprobe.llm import HttpProvider, load_providers


def test_defaults():
    cfg = Config()
    assert cfg.heading_ratio == 1.25
    assert cfg.atelier.window_size == 5
    assert cfg.atelier.stride == 3
    assert cfg.atelier.dedupe_threshold == 0.7
    assert cfg.atelier.min_words == 12 and cfg.atelier.max_words == 30
    assert cfg.forge.require_rule is True and cfg.forge.min_score == 0.0
    assert cfg.tasks.t1_n_grammars == 2
    assert cfg.tasks.t2_n_sentences == 1
    assert cfg.tasks.t3_n_grammars == 4 and cfg.tasks.t3_n_sentences == 2


def test_toml_override(tmp_path):
    path = tmp_path / "conf.toml"
    path.write_text(
        'heading_ratio = 1.5\nseed = 99\n'
        '[atelier]\nwindow_size = 7\nstride = 2\n'
        '[forge]\nmin_score = 6.5\n'
        '[tasks]\nt3_n_grammars = 6\n', encoding="utf-8")
    cfg = load_config(path)
    assert cfg.heading_ratio == 1.5
    assert cfg.seed == 99
    assert cfg.atelier.window_size == 7
    assert cfg.atelier.stride == 2
    assert cfg.atelier.dedupe_threshold == 0.7  # untouched default
    assert cfg.forge.min_score == 6.5
    assert cfg.tasks.t3_n_grammars == 6


def test_json_override_and_flag_precedence(tmp_path):
    path = tmp_path / "conf.json"
    path.write_text('{"seed": 5, "concurrency": 2, '
                    '"abbreviations": ["z.b.", "x.y."]}', encoding="utf-8")
    cfg = load_config(path, seed=42)
    assert cfg.seed == 42            # explicit flag beats the file
    assert cfg.concurrency == 2
    assert cfg.abbreviations == ("z.b.", "x.y.")


def test_keyword_map_override(tmp_path):
    path = tmp_path / "conf.json"
    path.write_text('{"section_keywords": [["syntax", ["sentence craft"]]]}',
                    encoding="utf-8")
    cfg = load_config(path)
    assert cfg.section_keywords == (("syntax", ("sentence craft",)),)


def test_snapshot_is_json_safe():
    import json

    snap = Config().snapshot()
    json.dumps(snap)
    assert snap["atelier"]["window_size"] == 5


def test_load_providers(tmp_path):
    path = tmp_path / "providers.toml"
    path.write_text(
        '[providers.openrouter]\n'
        'base_url = "https://openrouter.example/api/v1/"\n'
        'api_key_env = "OPENROUTER_API_KEY"\n'
        'timeout = 30\n'
        '[providers.openrouter.model_map]\n'
        'gemma = "google/gemma-3-27b-it"\n', encoding="utf-8")
    providers = load_providers(path)
    assert set(providers) == {"openrouter"}
    p = providers["openrouter"]
    assert isinstance(p, HttpProvider)
    assert p.base_url == "https://openrouter.example/api/v1"  # trailing / stripped
    assert p.api_key_env == "OPENROUTER_API_KEY"
    assert p.model_map == {"gemma": "google/gemma-3-27b-it"}
    assert p.timeout == 30.0
