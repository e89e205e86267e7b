"""Minimal external inference backend speaking the stdio protocol.

One JSON object per line on stdin:
    {"chip_png_b64": ..., "meta": [15 numbers], "request_id": ...}
one per line on stdout:
    {"logits": [5 numbers], "request_id": ...}

This stub scores by mean chip brightness plus the overall hazard entry;
a real CNN server would decode the PNG and run its model instead.
"""

import base64
import io
import json
import sys

from PIL import Image


def main() -> int:
    for line in sys.stdin:
        request = json.loads(line)
        png = base64.b64decode(request["chip_png_b64"])
        with Image.open(io.BytesIO(png)) as img:
            gray = img.convert("L")
            mean = sum(gray.getdata()) / (gray.width * gray.height * 255.0)
        hazard = request["meta"][7]  # overall hazard entry, already on [0, 1]
        score = 4.0 * hazard - 2.0 * mean
        logits = [-abs(score - center) for center in (0.0, 0.75, 1.5, 2.25, 3.0)]
        sys.stdout.write(json.dumps({"logits": logits, "request_id": request["request_id"]}) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
