"""Stub inference backend for tests: line-delimited JSON on stdio.

Replies with fixed logits (--logits), optionally after a delay, or
misbehaves on demand (--garbage, --wrong-id) to exercise failure paths.
With --meta-sum the first logit is the sum of the request's meta vector,
proving the wire carries real payloads.
"""

import argparse
import base64
import json
import sys
import time


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--logits", default="0,0,0,0,0")
    parser.add_argument("--delay-ms", type=int, default=0)
    parser.add_argument("--garbage", action="store_true")
    parser.add_argument("--wrong-id", action="store_true")
    parser.add_argument("--meta-sum", action="store_true")
    args = parser.parse_args()
    logits = [float(v) for v in args.logits.split(",")]

    for line in sys.stdin:
        request = json.loads(line)
        base64.b64decode(request["chip_png_b64"])  # must be well-formed
        if args.delay_ms:
            time.sleep(args.delay_ms / 1000.0)
        if args.garbage:
            sys.stdout.write("not json\n")
            sys.stdout.flush()
            continue
        reply_logits = list(logits)
        if args.meta_sum:
            reply_logits[0] = sum(request["meta"])
        reply = {
            "logits": reply_logits,
            "request_id": "nope" if args.wrong_id else request["request_id"],
        }
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
