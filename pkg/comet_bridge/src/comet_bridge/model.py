"""Checkpoint loading and inference.

Two kinds of checkpoint are supported:

- the bundled ``miniature-estimator-v1`` (or any ``.npz`` path with the
  same tensor layout): a small pretrained feed-forward regressor over
  order-sensitive similarity features, trained by ``comet_bridge.train``
  and shipped as package data so the bridge works fully offline;
- any other name is treated as a neural MT-quality checkpoint and handed
  to the ``unbabel-comet`` stack when that optional dependency is
  installed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import CheckpointUnavailable
from .features import DIM, featurize_batch

BUNDLED = "miniature-estimator-v1"


def _data_dir() -> Path:
    return Path(__file__).resolve().parent / "data"


class SurrogateEstimator:
    """Pretrained numpy MLP: features -> tanh hidden layer -> sigmoid score."""

    def __init__(self, w1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: float):
        if w1.shape[0] != DIM:
            raise CheckpointUnavailable(
                f"checkpoint expects {w1.shape[0]} features, bridge computes {DIM}")
        self.w1, self.b1, self.w2, self.b2 = w1, b1, w2, float(b2)

    @classmethod
    def load(cls, path: Path) -> "SurrogateEstimator":
        if not path.exists():
            raise CheckpointUnavailable(f"checkpoint file not found: {path}")
        with np.load(path) as data:
            return cls(data["w1"], data["b1"], data["w2"], data["b2"])

    def score_features(self, feats: np.ndarray) -> np.ndarray:
        hidden = np.tanh(feats @ self.w1 + self.b1)
        logits = hidden @ self.w2 + self.b2
        return 1.0 / (1.0 + np.exp(-logits))

    def predict(self, records: list[dict], batch_size: int = 64) -> list[float]:
        scores: list[float] = []
        for start in range(0, len(records), batch_size):
            batch = records[start:start + batch_size]
            feats = featurize_batch([(r["hypothesis"], r["reference"])
                                     for r in batch])
            scores.extend(float(s) for s in self.score_features(feats))
        return scores


class CometEstimator:
    """Adapter over the unbabel-comet inference stack (optional extra)."""

    def __init__(self, checkpoint_name: str):
        try:
            from comet import download_model, load_from_checkpoint
        except ImportError as e:
            raise CheckpointUnavailable(
                f"checkpoint {checkpoint_name!r} needs the unbabel-comet "
                "package (pip install 'comet-bridge[comet]')") from e
        try:
            path = download_model(checkpoint_name)
        except Exception as e:
            raise CheckpointUnavailable(
                f"could not fetch checkpoint {checkpoint_name!r}: {e}") from e
        self.model = load_from_checkpoint(path)

    def predict(self, records: list[dict], batch_size: int = 8) -> list[float]:
        data = [{"src": r.get("source", ""), "mt": r["hypothesis"],
                 "ref": r["reference"]} for r in records]
        output = self.model.predict(data, batch_size=batch_size, gpus=0)
        return [min(1.0, max(0.0, float(s))) for s in output.scores]


def load_estimator(checkpoint_name: str):
    if checkpoint_name == BUNDLED:
        return SurrogateEstimator.load(_data_dir() / f"{BUNDLED}.npz")
    path = Path(checkpoint_name)
    if path.suffix == ".npz":
        return SurrogateEstimator.load(path)
    return CometEstimator(checkpoint_name)
