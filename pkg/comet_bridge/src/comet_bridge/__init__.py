"""File-based machine-translation quality scoring bridge.

Reads a JSONL segment file ({segment_id, source, hypothesis, reference}),
runs a pretrained quality estimator, and writes one {segment_id, score}
record per input line, scores in [0, 1]. The bridge shares no runtime with
the pipeline that produces its inputs; files are the whole interface.
"""

from .errors import CheckpointUnavailable, MalformedInput
from .scoring import bridge_score

__all__ = ["bridge_score", "CheckpointUnavailable", "MalformedInput"]
