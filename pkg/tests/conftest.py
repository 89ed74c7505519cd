"""Shared test fixtures: synthetic datasets and offline LLM clients."""

from __future__ import annotations

import pytest

from grammarprobe.atelier import ExamplePair, GrammarPoint, Provenance
from grammarprobe.forge import MinimalPair
from grammarprobe.hashio import grammar_point_id, stable_id
from grammarprobe.llm import LlmClient
from grammarprobe.proofstand import Dataset
from grammarprobe.prompts import TemplateSet


def make_point(i: int) -> GrammarPoint:
    desc = (f"Synthetic rule number {i}: construction variant {i} places "
            f"marker token m{i} in slot {i % 5} of the clause.")
    return GrammarPoint(gp_id=grammar_point_id(desc), description=desc,
                        source=(Provenance("window", chapter_id="ch000",
                                           window_id=f"ch000-w{i:03d}"),))


def make_dataset(n_points: int = 60, pairs_per_point: int = 3,
                 n_minimal: int = 80) -> Dataset:
    points = [make_point(i) for i in range(n_points)]
    pairs = []
    for i, gp in enumerate(points):
        for j in range(pairs_per_point):
            en = f"English sample sentence {i}-{j} exercising rule {i} in context."
            lux = f"Synteta frasa {i}-{j} kun marker m{i} en slot."
            pairs.append(ExamplePair(
                pair_id=stable_id("pr", gp.gp_id, en, lux), gp_ids=(gp.gp_id,),
                english=en, luxembourgish=lux, target_length=12,
                status="verified"))
    minimal = []
    for k in range(n_minimal):
        gp = points[k % n_points]
        correct = f"Corekta frasa {k} kun marker m{k % n_points}."
        incorrect = f"Korupta frasa {k} sen marker."
        minimal.append(MinimalPair(
            mp_id=stable_id("mp", gp.gp_id, correct, incorrect),
            gp_id=gp.gp_id, correct=correct, incorrect=incorrect,
            edit_summary="synthetic corruption", edit_distance=5))
    return Dataset(points=points, pairs=pairs, minimal_pairs=minimal)


@pytest.fixture(scope="session")
def big_dataset() -> Dataset:
    return make_dataset()


@pytest.fixture(scope="session")
def templates() -> TemplateSet:
    return TemplateSet.load()


def offline_client(provider, name: str = "mock", **kwargs) -> LlmClient:
    """Client with no cache and no sleeping, for mock providers."""
    return LlmClient({name: provider}, cache=None, sleep=lambda s: None, **kwargs)
