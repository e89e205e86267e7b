"""End-to-end scene prediction and damage-map artifacts.

A damage map holds one entry per input footprint: the classified level (or
unclassified) and the full 5-level probability row at one hypothetical
hazard level. Maps serialize to GeoJSON (lng/lat via linear interpolation
over the scene bounds) and render to PNG choropleths over a grayscale
backdrop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .backbones import BackboneRegistry, ensemble_predict, route
from .dataset import DamageClass, LabeledBuilding, class_to_level
from .errors import IdMismatch, MissingGeoBounds
from .features import extract_features, meta_vector
from .hazard import HazardAttributes, ThresholdTable, attribute_levels, load_thresholds, overall_level
from .heads import DEFAULT_TAU, N_LEVELS, classify
from .rastergeom import DEFAULT_CHIP_SIZE, Footprint, GeoBounds, Scene, chip_set, rasterize
from .sceneio import encode_png

# Level colors are artifact constants so renders are byte-reproducible.
PALETTE: dict[str, str] = {
    "1": "#2ECC71",
    "2": "#F1C40F",
    "3": "#E67E22",
    "4": "#E74C3C",
    "5": "#8E44AD",
    "unclassified": "#95A5A6",
}
DEFAULT_PALETTE_ID = "default"

UNIFORM_PROBS = tuple([1.0 / N_LEVELS] * N_LEVELS)


def hex_to_rgb(color: str) -> tuple[int, int, int]:
    color = color.lstrip("#")
    return tuple(int(color[i:i + 2], 16) for i in (0, 2, 4))


@dataclass(frozen=True)
class BuildingPrediction:
    building_id: str
    level: Optional[int]  # None == unclassified
    probs: tuple[float, ...]

    def level_label(self) -> str | int:
        return self.level if self.level is not None else "unclassified"


@dataclass
class DamageMap:
    scene_id: str
    hazard_level: int
    entries: list[BuildingPrediction]
    palette_id: str = DEFAULT_PALETTE_ID

    def entry_for(self, building_id: str) -> BuildingPrediction:
        for entry in self.entries:
            if entry.building_id == building_id:
                return entry
        raise KeyError(building_id)

    def expected_levels(self) -> dict[str, float]:
        """Per building, the probability-weighted mean damage level."""
        levels = np.arange(1, N_LEVELS + 1)
        return {e.building_id: float(levels @ np.asarray(e.probs)) for e in self.entries}

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "hazard_level": self.hazard_level,
            "palette_id": self.palette_id,
            "entries": [
                {
                    "building_id": e.building_id,
                    "level": e.level_label(),
                    "probs": list(e.probs),
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DamageMap":
        entries = [
            BuildingPrediction(
                building_id=e["building_id"],
                level=None if e["level"] == "unclassified" else int(e["level"]),
                probs=tuple(e["probs"]),
            )
            for e in data["entries"]
        ]
        return cls(
            scene_id=data["scene_id"],
            hazard_level=int(data["hazard_level"]),
            entries=entries,
            palette_id=data.get("palette_id", DEFAULT_PALETTE_ID),
        )


@dataclass
class DamageModel:
    """Everything inference needs: backbones plus decision parameters."""

    registry: BackboneRegistry
    tau: float = DEFAULT_TAU
    chip_size: int = DEFAULT_CHIP_SIZE
    thresholds: ThresholdTable = field(default_factory=load_thresholds)


def _resolve_hazard(model: DamageModel, hazard: HazardAttributes | int
                    ) -> tuple[int, Optional[dict[str, int]]]:
    if isinstance(hazard, HazardAttributes):
        return overall_level(hazard, model.thresholds), attribute_levels(hazard, model.thresholds)
    level = int(hazard)
    if not 1 <= level <= N_LEVELS:
        raise ValueError(f"hazard level must be in 1..{N_LEVELS}, got {level}")
    return level, None


def predict_scene(scene: Scene, footprints: Sequence[Footprint], disaster_type: str,
                  hazard: HazardAttributes | int, model: DamageModel) -> DamageMap:
    """Forecast per-building damage for one hypothetical hazard.

    Pre-disaster pixels only: chips -> features -> meta -> routed ensemble ->
    thresholded classification, one entry per input footprint. Footprints
    whose mask is empty get an unclassified entry with uniform probabilities.
    """
    level, attr_levels = _resolve_hazard(model, hazard)
    weights = route(disaster_type, model.registry)
    meta = meta_vector(disaster_type, level, attr_levels)

    chips = chip_set(scene, footprints, model.chip_size)
    by_id = {chip.building_id: chip for chip in chips.chips}

    entries = []
    for fp in footprints:
        chip = by_id.get(fp.building_id)
        if chip is None:
            entries.append(BuildingPrediction(fp.building_id, None, UNIFORM_PROBS))
            continue
        probs = ensemble_predict(chip, meta, model.registry, weights)
        entries.append(BuildingPrediction(
            building_id=fp.building_id,
            level=classify(probs, model.tau),
            probs=tuple(float(p) for p in probs),
        ))
    return DamageMap(scene_id=scene.scene_id, hazard_level=level, entries=entries)


def sweep(scene: Scene, footprints: Sequence[Footprint], disaster_type: str,
          levels: Sequence[int], model: DamageModel) -> list[DamageMap]:
    """One damage map per hypothetical hazard level, same building order.

    Chips and features are computed once; only the hazard entries of the
    meta vector vary across levels.
    """
    if not levels:
        raise ValueError("levels must be non-empty")
    for level in levels:
        if not 1 <= int(level) <= N_LEVELS:
            raise ValueError(f"hazard level must be in 1..{N_LEVELS}, got {level}")

    weights = route(disaster_type, model.registry)
    needs_pixels = _needs_pixels(model.registry, weights)
    chips = chip_set(scene, footprints, model.chip_size)
    chip_features = {chip.building_id: (chip, extract_features(chip)) for chip in chips.chips}

    maps = []
    for level in levels:
        meta = meta_vector(disaster_type, int(level))
        entries = []
        for fp in footprints:
            held = chip_features.get(fp.building_id)
            if held is None:
                entries.append(BuildingPrediction(fp.building_id, None, UNIFORM_PROBS))
                continue
            chip, feats = held
            carrier = chip if needs_pixels else feats
            probs = ensemble_predict(carrier, meta, model.registry, weights)
            entries.append(BuildingPrediction(
                building_id=fp.building_id,
                level=classify(probs, model.tau),
                probs=tuple(float(p) for p in probs),
            ))
        maps.append(DamageMap(scene_id=scene.scene_id, hazard_level=int(level), entries=entries))
    return maps


def _needs_pixels(registry: BackboneRegistry, weights: dict[str, float]) -> bool:
    return any(registry.get(t).kind == "external" for t in weights)


def pixel_to_lnglat(x: float, y: float, bounds: GeoBounds, width: int, height: int
                    ) -> tuple[float, float]:
    """Linear pixel -> geographic interpolation; (0, 0) is (lng_min, lat_max)."""
    lng = bounds.lng_min + (x / width) * (bounds.lng_max - bounds.lng_min)
    lat = bounds.lat_max - (y / height) * (bounds.lat_max - bounds.lat_min)
    return lng, lat


def to_geojson(damage_map: DamageMap, footprints: Sequence[Footprint],
               geo_bounds: Optional[GeoBounds], scene_size: tuple[int, int]) -> str:
    """Serialize a damage map as a GeoJSON FeatureCollection.

    Polygon coordinates are (lng, lat) rounded to 6 decimal places; each
    feature carries building_id, damage_level, probs and hazard_level.
    """
    if geo_bounds is None:
        raise MissingGeoBounds(f"scene {damage_map.scene_id!r} has no geo bounds")
    width, height = scene_size
    by_id = {fp.building_id: fp for fp in footprints}

    features = []
    for entry in damage_map.entries:
        fp = by_id[entry.building_id]
        coordinates = [
            [
                [round(c, 6) for c in pixel_to_lnglat(x, y, geo_bounds, width, height)]
                for x, y in ring
            ]
            for ring in fp.rings
        ]
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": coordinates},
            "properties": {
                "building_id": entry.building_id,
                "damage_level": entry.level_label(),
                "probs": list(entry.probs),
                "hazard_level": damage_map.hazard_level,
            },
        })
    doc = {
        "type": "FeatureCollection",
        "features": features,
        "properties": {
            "scene_id": damage_map.scene_id,
            "hazard_level": damage_map.hazard_level,
            "palette_id": damage_map.palette_id,
        },
    }
    return json.dumps(doc, separators=(",", ":"))


def render_png(damage_map: DamageMap, scene: Scene, footprints: Sequence[Footprint],
               palette: Optional[dict[str, str]] = None) -> bytes:
    """Choropleth render: grayscale backdrop, buildings filled by level color.

    Deterministic bytes for identical inputs.
    """
    palette = palette or PALETTE
    lum = np.rint(
        scene.pixels.astype(np.float64) @ np.array([0.299, 0.587, 0.114])
    ).astype(np.uint8)
    canvas = np.repeat(lum[:, :, None], 3, axis=2)

    by_id = {fp.building_id: fp for fp in footprints}
    for entry in damage_map.entries:
        fp = by_id.get(entry.building_id)
        if fp is None:
            continue
        mask = rasterize(fp, scene.width, scene.height)
        color = hex_to_rgb(palette[str(entry.level_label())])
        canvas[mask] = color
    return encode_png(canvas)


@dataclass
class EvalReport:
    """Accuracy against gold labels; gold-unclassified buildings are counted
    but excluded from the accuracy denominator."""

    accuracy: float
    confusion: list[list[int]]  # rows gold 1..5 + unclassified; cols pred 1..5 + unclassified
    n: int
    n_classified_gold: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion,
            "n": self.n,
            "n_classified_gold": self.n_classified_gold,
        }


def evaluate(pred: DamageMap, gold: Sequence[LabeledBuilding]) -> EvalReport:
    """Score a prediction against post-event gold labels (scoring only;
    gold never feeds inference)."""
    gold_by_id = {b.building_id: b for b in gold}
    pred_ids = {e.building_id for e in pred.entries}
    if pred_ids != set(gold_by_id):
        missing = sorted(set(gold_by_id) - pred_ids)[:3]
        extra = sorted(pred_ids - set(gold_by_id))[:3]
        raise IdMismatch(f"building ids disagree (missing={missing}, extra={extra})")

    confusion = [[0] * (N_LEVELS + 1) for _ in range(N_LEVELS + 1)]
    matches = 0
    n_classified = 0
    for entry in pred.entries:
        gold_building = gold_by_id[entry.building_id]
        col = N_LEVELS if entry.level is None else entry.level - 1
        if gold_building.damage == DamageClass.UNCLASSIFIED:
            confusion[N_LEVELS][col] += 1
            continue
        row = class_to_level(gold_building.damage) - 1
        confusion[row][col] += 1
        n_classified += 1
        if entry.level is not None and row == col:
            matches += 1

    accuracy = matches / n_classified if n_classified else 0.0
    return EvalReport(
        accuracy=accuracy,
        confusion=confusion,
        n=len(pred.entries),
        n_classified_gold=n_classified,
    )
