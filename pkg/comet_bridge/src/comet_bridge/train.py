"""Train the bundled estimator and freeze its checkpoint.

Usage: ``python -m comet_bridge.train``

The model is a ranking-oriented regressor: synthetic reference sentences are
paired with hypotheses at graded corruption levels (identity, light edits,
word shuffles, heavy deletions, unrelated text) and the network learns to
map similarity features onto a quality target in [0, 1]. Everything is
seeded, so retraining reproduces the committed checkpoint bit-exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .features import DIM, featurize_batch
from .model import BUNDLED

VOCAB = ("den klengen hond gaart wunnt frendlech leit gewunnecht schwanz "
         "heich visiteur kennt haus moien welt kaz kand buch sprooch wierder "
         "saz regel plural artikel verb the small dog garden lives friendly "
         "people habit tail high visitor arrives house morning world cat "
         "child book language words sentence rule").split()

HIDDEN = 16
EPOCHS = 400
LEARNING_RATE = 0.5
SAMPLES = 3000


def _sentence(rng: np.random.Generator) -> str:
    n = int(rng.integers(5, 16))
    return " ".join(VOCAB[int(i)] for i in rng.integers(0, len(VOCAB), n))


def _corrupt(rng: np.random.Generator, ref: str, level: int) -> str:
    words = ref.split()
    if level == 0:
        return ref
    if level == 1:                       # light: one local edit
        i = int(rng.integers(0, max(1, len(words) - 1)))
        op = int(rng.integers(0, 3))
        if op == 0 and len(words) > 1:
            words.pop(i)
        elif op == 1:
            words[i] = VOCAB[int(rng.integers(0, len(VOCAB)))]
        else:
            words.insert(i, VOCAB[int(rng.integers(0, len(VOCAB)))])
        return " ".join(words)
    if level == 2:                       # word shuffle: order destroyed
        perm = rng.permutation(len(words))
        return " ".join(words[int(i)] for i in perm)
    if level == 3:                       # heavy: drop half, edit the rest
        keep = [w for w in words if rng.random() > 0.5] or words[:1]
        for i in range(len(keep)):
            if rng.random() < 0.3:
                keep[i] = VOCAB[int(rng.integers(0, len(VOCAB)))]
        return " ".join(keep)
    return _sentence(rng)                # unrelated


TARGETS = {0: 0.97, 1: 0.75, 2: 0.45, 3: 0.25, 4: 0.05}


def build_training_set(seed: int = 1312) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    pairs, targets = [], []
    for _ in range(SAMPLES):
        ref = _sentence(rng)
        level = int(rng.integers(0, 5))
        hyp = _corrupt(rng, ref, level)
        pairs.append((hyp, ref))
        jitter = float(rng.normal(0, 0.02))
        targets.append(min(0.99, max(0.01, TARGETS[level] + jitter)))
    return featurize_batch(pairs), np.asarray(targets)


def train(seed: int = 1312) -> dict[str, np.ndarray]:
    feats, targets = build_training_set(seed)
    rng = np.random.default_rng(seed + 1)
    w1 = rng.normal(0, 0.4, size=(DIM, HIDDEN))
    b1 = np.zeros(HIDDEN)
    w2 = rng.normal(0, 0.4, size=HIDDEN)
    b2 = 0.0
    n = len(targets)
    for epoch in range(EPOCHS):
        hidden = np.tanh(feats @ w1 + b1)
        pred = 1.0 / (1.0 + np.exp(-(hidden @ w2 + b2)))
        err = pred - targets
        # MSE through the sigmoid; full-batch gradient descent
        dlogit = 2.0 * err * pred * (1 - pred) / n
        gw2 = hidden.T @ dlogit
        gb2 = dlogit.sum()
        dhidden = np.outer(dlogit, w2) * (1 - hidden ** 2)
        gw1 = feats.T @ dhidden
        gb1 = dhidden.sum(axis=0)
        lr = LEARNING_RATE * (0.999 ** epoch)
        w1 -= lr * gw1
        b1 -= lr * gb1
        w2 -= lr * gw2
        b2 -= lr * gb2
    loss = float(np.mean((pred - targets) ** 2))
    print(f"final training MSE: {loss:.5f} over {n} samples")
    return {"w1": w1, "b1": b1, "w2": w2, "b2": np.float64(b2)}


def main() -> None:
    weights = train()
    out = Path(__file__).resolve().parent / "data" / f"{BUNDLED}.npz"
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savez(out, **weights)
    print(f"checkpoint written: {out}")


if __name__ == "__main__":
    main()
