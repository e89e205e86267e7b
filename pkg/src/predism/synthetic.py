"""Deterministic synthetic scenes, events and training sets for desk-scale
runs, demos and tests. Everything is seeded; no network, no real imagery.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import DISASTER_TYPES, DamageClass, LabeledBuilding
from .features import meta_vector
from .rastergeom import Chip, Footprint, GeoBounds, Scene
from .sceneio import save_scene
from .training import TrainingSet

# latent mix for the separable set: luminance dominates, hazard shifts
LUMINANCE_WEIGHT = 0.8
HAZARD_WEIGHT = 0.2
LABEL_MARGIN = 0.05


def _rect_footprint(building_id: str, x0: float, y0: float, x1: float, y1: float) -> Footprint:
    return Footprint(
        building_id=building_id,
        rings=(((x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)),),
    )


def synthetic_scene(n_buildings: int, size: int = 320, seed: int = 0,
                    scene_id: str = "synthetic",
                    geo_bounds: GeoBounds | None = None
                    ) -> tuple[Scene, list[Footprint], list[float]]:
    """A gridded town: one rectangular building per grid cell.

    Returns the scene, footprints in id order, and each building's gray
    value on [0, 1] (brightness doubles as its 'sturdiness' in generated
    labels).
    """
    rng = np.random.default_rng(seed)
    grid = int(np.ceil(np.sqrt(n_buildings)))
    cell = size // grid
    if cell < 8:
        raise ValueError(f"{n_buildings} buildings need a larger scene than {size}px")

    pixels = rng.integers(40, 80, size=(size, size, 3), dtype=np.uint8)
    footprints: list[Footprint] = []
    grays: list[float] = []
    for k in range(n_buildings):
        row, col = divmod(k, grid)
        cx, cy = col * cell, row * cell
        w = int(rng.integers(cell // 2, cell - 2))
        h = int(rng.integers(cell // 2, cell - 2))
        x0 = cx + int(rng.integers(1, cell - w))
        y0 = cy + int(rng.integers(1, cell - h))
        gray = float(rng.uniform(0.15, 0.95))
        value = int(round(gray * 255))
        jitter = rng.integers(-12, 13, size=3)
        color = np.clip(np.array([value, value, value]) + jitter, 0, 255).astype(np.uint8)
        pixels[y0:y0 + h, x0:x0 + w] = color
        footprints.append(_rect_footprint(f"b{k:04d}", x0, y0, x0 + w, y0 + h))
        grays.append(gray)

    if geo_bounds is None:
        geo_bounds = GeoBounds(lat_min=27.6, lat_max=27.7, lng_min=85.2, lng_max=85.3)
    scene = Scene(pixels=pixels, scene_id=scene_id, geo_bounds=geo_bounds)
    return scene, footprints, grays


def _gray_to_class(gray: float) -> DamageClass:
    # darker buildings read as more fragile in the generated gold labels
    if gray > 0.75:
        return DamageClass.NO_DAMAGE
    if gray > 0.55:
        return DamageClass.MINOR_DAMAGE
    if gray > 0.35:
        return DamageClass.MAJOR_DAMAGE
    return DamageClass.DESTROYED


def write_event(root: str | Path, event_id: str, disaster_type: str,
                n_scenes: int = 1, buildings_per_scene: int = 25,
                seed: int = 0, unclassified_fraction: float = 0.0,
                hazard_attrs: dict | None = None, scene_size: int = 320) -> Path:
    """Materialize a synthetic event directory (images/, labels/, hazard.json).

    Gold damage classes follow building brightness; a fraction can be
    downgraded to unclassified to exercise the discard rule.
    """
    if disaster_type not in DISASTER_TYPES:
        raise ValueError(f"unknown disaster type {disaster_type!r}")
    event_dir = Path(root) / "events" / event_id
    rng = np.random.default_rng([seed, 17])

    for s in range(n_scenes):
        scene_id = f"{event_id}_s{s}"
        scene, footprints, grays = synthetic_scene(
            buildings_per_scene, size=scene_size, seed=seed + 101 * s, scene_id=scene_id
        )
        save_scene(scene, event_dir / "images" / f"{scene_id}.png")

        buildings = []
        for fp, gray in zip(footprints, grays):
            damage = _gray_to_class(gray)
            if unclassified_fraction and rng.random() < unclassified_fraction:
                damage = DamageClass.UNCLASSIFIED
            buildings.append(LabeledBuilding(
                footprint=fp, damage=damage, event_id=event_id,
                disaster_type=disaster_type, scene_id=scene_id,
            ))
        from .dataset import serialize_label_file

        labels_dir = event_dir / "labels"
        labels_dir.mkdir(parents=True, exist_ok=True)
        (labels_dir / f"{scene_id}.json").write_text(serialize_label_file(buildings))

    if hazard_attrs:
        (event_dir / "hazard.json").write_text(json.dumps(hazard_attrs, indent=2))
    return event_dir


def constant_chip(rgb: tuple[float, float, float], size: int = 64,
                  building_id: str = "chip", area_fraction: float = 0.1,
                  compactness: float = 1.5) -> Chip:
    """A uniform-color chip with the given per-channel values on [0, 1]."""
    pixels = np.empty((size, size, 3), dtype=np.uint8)
    for c in range(3):
        pixels[:, :, c] = int(round(rgb[c] * 255))
    return Chip(pixels=pixels, building_id=building_id, scene_id="synthetic",
                area_fraction=area_fraction, compactness=compactness)


def separable_set(n: int = 500, seed: int = 7, chip_size: int = 64) -> TrainingSet:
    """A margin-separable training set: the level is quantized from a latent
    that mixes chip luminance with the hazard level.

    latent = 0.8 * gray + 0.2 * (h - 1) / 4, level = 1 + floor(5 * latent);
    latents are resampled away from the quantization boundaries so the set
    is cleanly learnable.
    """
    rng = np.random.default_rng(seed)
    chips, metas, levels = [], [], []
    while len(chips) < n:
        gray = float(rng.uniform(0.0, 1.0))
        hazard = int(rng.integers(1, 6))
        latent = LUMINANCE_WEIGHT * gray + HAZARD_WEIGHT * (hazard - 1) / 4.0
        position = latent * 5.0
        if abs(position - round(position)) < LABEL_MARGIN * 5.0:
            continue
        level = min(int(position) + 1, 5)
        disaster_type = DISASTER_TYPES[int(rng.integers(0, len(DISASTER_TYPES)))]
        chips.append(constant_chip(
            (gray, gray, gray), size=chip_size, building_id=f"c{len(chips):04d}",
            area_fraction=float(rng.uniform(0.01, 0.25)),
            compactness=float(rng.uniform(1.0, 3.0)),
        ))
        metas.append(meta_vector(disaster_type, hazard))
        levels.append(level)
    return TrainingSet(chips=chips, metas=metas, levels=levels)
