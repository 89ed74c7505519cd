"""comet-bridge command line interface."""

from __future__ import annotations

import argparse
import sys

from .errors import BridgeError
from .model import BUNDLED
from .scoring import bridge_score


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="comet-bridge",
        description="Score translation segments with a pretrained quality "
                    "estimator; file in, file out.")
    parser.add_argument("--in", dest="in_file", required=True,
                        help="JSONL of {segment_id, source, hypothesis, reference}")
    parser.add_argument("--out", dest="out_file", required=True,
                        help="JSONL of {segment_id, score in [0,1]}")
    parser.add_argument("--checkpoint", default=BUNDLED,
                        help=f"checkpoint name, .npz path, or a comet model id "
                             f"(default: {BUNDLED})")
    parser.add_argument("--batch-size", type=int, default=64)
    args = parser.parse_args(argv)
    try:
        n = bridge_score(args.in_file, args.checkpoint, args.out_file,
                         batch_size=args.batch_size)
    except FileNotFoundError as e:
        print(f"comet-bridge: {e}", file=sys.stderr)
        return 1
    except BridgeError as e:
        print(f"comet-bridge: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    print(f"scored {n} segment(s) -> {args.out_file}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
