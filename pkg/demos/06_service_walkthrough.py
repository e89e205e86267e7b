"""The HTTP service end to end: health, config, hazard scoring, a sweep.

Starts the service on an ephemeral port, generates a synthetic event on
disk, runs a 3-level sweep over HTTP, and downloads the artifacts the
manifest points at.
"""

import json
import tempfile
import urllib.request
from pathlib import Path

from predism.config import AppConfig
from predism.service import serve
from predism.synthetic import write_event

OUT = Path(__file__).parent / "out" / "06"
OUT.mkdir(parents=True, exist_ok=True)


def call(method, port, path, body=None):
    data = json.dumps(body).encode() if body is not None else None
    request = urllib.request.Request(f"http://127.0.0.1:{port}{path}", data=data,
                                     headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(request, timeout=30) as resp:
        raw = resp.read()
    return raw if path.endswith(".png") else json.loads(raw)


with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp) / "data"
    write_event(root, "walkthrough-flood", "flood", buildings_per_scene=25,
                seed=6, scene_size=256)
    event_dir = root / "events" / "walkthrough-flood"

    config = AppConfig(listen="127.0.0.1:0", artifacts_dir=str(Path(tmp) / "artifacts"))
    service = serve(config)
    try:
        port = service.port
        print(f"service on port {port}")
        print("GET /health ->", call("GET", port, "/health"))

        cfg = call("GET", port, "/config")
        print("GET /config palette ->", cfg["palette"])

        score = call("POST", port, "/hazard-score",
                     {"attrs": {"fatality": 1500, "water_disruption": 9}})
        print("POST /hazard-score ->", score)

        manifest = call("POST", port, "/sweep", {
            "scene_path": str(event_dir / "images" / "walkthrough-flood_s0.png"),
            "labels_path": str(event_dir / "labels" / "walkthrough-flood_s0.json"),
            "disaster_type": "flood",
            "levels": [3, 4, 5],
        })
        print(f"POST /sweep -> job {manifest['job_id']}, "
              f"{len(manifest['maps'])} maps, {len(manifest['renders'])} renders")

        for entry, render in zip(manifest["maps"], manifest["renders"]):
            level = entry["level"]
            n = len(entry["geojson"]["features"])
            print(f"  level {level}: {n} features, render at {render}")
            png = call("GET", port, render)
            (OUT / f"level{level}.png").write_bytes(png)
            (OUT / f"level{level}.geojson").write_text(json.dumps(entry["geojson"]))
    finally:
        service.stop()

print(f"\ndownloaded artifacts in {OUT}")
