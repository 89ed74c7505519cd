"""Order-sensitive similarity features for the bundled estimator.

Character n-gram precision/recall up to order 6 plus word n-grams up to
order 2, length ratios, and set overlap: cheap, language-agnostic, and
sensitive to word order (shuffling a hypothesis destroys its cross-word
character n-grams), which is what the ranking property of a quality
estimator needs.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

CHAR_ORDER = 6
WORD_ORDER = 2
DIM = 2 * (CHAR_ORDER + WORD_ORDER) + 4


def _ngrams(seq, n: int) -> Counter:
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def _pr(hyp_seq, ref_seq, n: int) -> tuple[float, float]:
    hyp = _ngrams(hyp_seq, n)
    ref = _ngrams(ref_seq, n)
    hyp_total = sum(hyp.values())
    ref_total = sum(ref.values())
    if hyp_total == 0 or ref_total == 0:
        return 0.0, 0.0
    match = sum((hyp & ref).values())
    return match / hyp_total, match / ref_total


def featurize(hypothesis: str, reference: str) -> np.ndarray:
    hyp_chars = "".join(hypothesis.split())
    ref_chars = "".join(reference.split())
    hyp_words = hypothesis.split()
    ref_words = reference.split()

    values: list[float] = []
    for n in range(1, CHAR_ORDER + 1):
        values.extend(_pr(hyp_chars, ref_chars, n))
    for n in range(1, WORD_ORDER + 1):
        values.extend(_pr(hyp_words, ref_words, n))

    h, r = len(hyp_words), len(ref_words)
    values.append(min(h, r) / max(h, r) if h and r else 0.0)
    hc, rc = len(hyp_chars), len(ref_chars)
    values.append(min(hc, rc) / max(hc, rc) if hc and rc else 0.0)
    union = set(hyp_words) | set(ref_words)
    values.append(len(set(hyp_words) & set(ref_words)) / len(union) if union else 0.0)
    values.append(1.0 if hypothesis.strip() == reference.strip() else 0.0)
    return np.asarray(values, dtype=np.float64)


def featurize_batch(pairs: list[tuple[str, str]]) -> np.ndarray:
    if not pairs:
        return np.zeros((0, DIM), dtype=np.float64)
    return np.stack([featurize(h, r) for h, r in pairs])
