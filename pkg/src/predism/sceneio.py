"""Scene file IO: 8-bit RGB PNG plus an optional `<scene>.geo.json` sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .rastergeom import GeoBounds, Scene


def geo_sidecar_path(image_path: str | Path) -> Path:
    p = Path(image_path)
    return p.with_name(p.stem + ".geo.json")


def load_scene(image_path: str | Path, scene_id: str | None = None) -> Scene:
    p = Path(image_path)
    with Image.open(p) as img:
        pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
    bounds = None
    sidecar = geo_sidecar_path(p)
    if sidecar.exists():
        doc = json.loads(sidecar.read_text())
        bounds = GeoBounds(
            lat_min=float(doc["lat_min"]),
            lat_max=float(doc["lat_max"]),
            lng_min=float(doc["lng_min"]),
            lng_max=float(doc["lng_max"]),
        )
    return Scene(pixels=pixels, scene_id=scene_id or p.stem, geo_bounds=bounds)


def save_scene(scene: Scene, image_path: str | Path) -> Path:
    p = Path(image_path)
    p.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(scene.pixels, mode="RGB").save(p, format="PNG")
    if scene.geo_bounds is not None:
        geo_sidecar_path(p).write_text(json.dumps(scene.geo_bounds.as_dict(), indent=2))
    return p


def decode_scene_png(data: bytes, scene_id: str, geo_bounds: GeoBounds | None = None) -> Scene:
    import io

    with Image.open(io.BytesIO(data)) as img:
        pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return Scene(pixels=pixels, scene_id=scene_id, geo_bounds=geo_bounds)


def encode_png(pixels: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()
