"""Label ingestion: damage classes, event catalogs, training splits.

Label files follow the common building-damage convention: a JSON document
with scene metadata plus one WKT feature per building, so existing corpora
convert with a thin renamer.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    EmptyCatalog,
    InsufficientData,
    MalformedLabelFile,
    MixedDisasterTypesInEvent,
    UnclassifiedNotMappable,
    UnknownDamageClass,
    UnknownDisasterType,
)
from .rastergeom import Footprint, footprint_to_wkt, parse_wkt

DISASTER_TYPES = (
    "earthquake",
    "fire",
    "flood",
    "hurricane",
    "tornado",
    "tsunami",
    "volcanic-eruption",
)


class DamageClass(str, Enum):
    UNCLASSIFIED = "unclassified"
    NO_DAMAGE = "no-damage"
    MINOR_DAMAGE = "minor-damage"
    MAJOR_DAMAGE = "major-damage"
    DESTROYED = "destroyed"


# 4 usable classes onto the 5-level scale; "destroyed" is the worst case so
# it maps to 5, leaving level 4 unused by training data.
_CLASS_LEVELS = {
    DamageClass.NO_DAMAGE: 1,
    DamageClass.MINOR_DAMAGE: 2,
    DamageClass.MAJOR_DAMAGE: 3,
    DamageClass.DESTROYED: 5,
}


def _canon(text: str) -> str:
    return text.strip().lower().replace("_", "-").replace(" ", "-")


def normalize_damage_class(text: str) -> DamageClass:
    """Case/hyphen-insensitive damage class lookup ('No Damage' == 'no-damage')."""
    try:
        return DamageClass(_canon(text))
    except ValueError:
        raise UnknownDamageClass(f"unknown damage class {text!r}") from None


def normalize_disaster_type(text: str) -> str:
    canon = _canon(text)
    if canon not in DISASTER_TYPES:
        raise UnknownDisasterType(f"unknown disaster type {text!r}")
    return canon


def class_to_level(c: DamageClass) -> int:
    """Damage class to level 1..5; unclassified records are not mappable."""
    if c == DamageClass.UNCLASSIFIED:
        raise UnclassifiedNotMappable("unclassified buildings carry no damage level")
    return _CLASS_LEVELS[c]


@dataclass(frozen=True)
class LabeledBuilding:
    footprint: Footprint
    damage: DamageClass
    event_id: str
    disaster_type: str
    scene_id: str

    def __post_init__(self) -> None:
        if self.disaster_type not in DISASTER_TYPES:
            raise UnknownDisasterType(f"unknown disaster type {self.disaster_type!r}")

    @property
    def building_id(self) -> str:
        return self.footprint.building_id


def parse_label_file(doc: str) -> list[LabeledBuilding]:
    """Parse one label document into per-building records.

    Expected shape:
        {"metadata": {"event": ..., "disaster_type": ..., "scene_id": ...},
         "features": [{"wkt": ..., "properties": {"subtype": ..., "uid": ...}}, ...]}
    """
    try:
        data = json.loads(doc)
    except json.JSONDecodeError as e:
        raise MalformedLabelFile(f"invalid JSON: {e}") from None
    if not isinstance(data, dict):
        raise MalformedLabelFile("label document must be a JSON object")
    try:
        meta = data["metadata"]
        event_id = str(meta["event"])
        disaster_type = normalize_disaster_type(str(meta["disaster_type"]))
        scene_id = str(meta["scene_id"])
        features = data["features"]
    except (KeyError, TypeError) as e:
        raise MalformedLabelFile(f"missing metadata field: {e}") from None
    if not isinstance(features, list):
        raise MalformedLabelFile("'features' must be a list")

    buildings = []
    for idx, feat in enumerate(features):
        try:
            wkt = feat["wkt"]
            props = feat["properties"]
            subtype = props["subtype"]
            uid = str(props["uid"])
        except (KeyError, TypeError) as e:
            raise MalformedLabelFile(f"feature {idx}: missing field {e}") from None
        buildings.append(
            LabeledBuilding(
                footprint=parse_wkt(wkt, building_id=uid),
                damage=normalize_damage_class(str(subtype)),
                event_id=event_id,
                disaster_type=disaster_type,
                scene_id=scene_id,
            )
        )
    return buildings


def serialize_label_file(buildings: list[LabeledBuilding]) -> str:
    """Inverse of parse_label_file for a single scene's buildings."""
    if not buildings:
        raise ValueError("nothing to serialize")
    first = buildings[0]
    return json.dumps(
        {
            "metadata": {
                "event": first.event_id,
                "disaster_type": first.disaster_type,
                "scene_id": first.scene_id,
            },
            "features": [
                {
                    "wkt": footprint_to_wkt(b.footprint),
                    "properties": {"subtype": b.damage.value, "uid": b.building_id},
                }
                for b in buildings
            ],
        },
        indent=2,
    )


def filter_training(buildings: list[LabeledBuilding]) -> list[LabeledBuilding]:
    """Drop unclassified records (they carry no usable damage level)."""
    return [b for b in buildings if b.damage != DamageClass.UNCLASSIFIED]


@dataclass
class SceneEntry:
    scene_id: str
    image_path: Path
    buildings: list[LabeledBuilding]


@dataclass
class Event:
    event_id: str
    disaster_type: str
    scenes: dict[str, SceneEntry] = field(default_factory=dict)

    @property
    def building_count(self) -> int:
        return sum(len(s.buildings) for s in self.scenes.values())


@dataclass
class EventCatalog:
    """Events grouped by disaster type, lexicographically ordered."""

    by_type: dict[str, dict[str, Event]]

    def events(self) -> list[Event]:
        return [ev for events in self.by_type.values() for ev in events.values()]

    def all_buildings(self) -> list[LabeledBuilding]:
        out = []
        for ev in self.events():
            for scene in ev.scenes.values():
                out.extend(scene.buildings)
        return out

    @property
    def building_count(self) -> int:
        return sum(ev.building_count for ev in self.events())

    def summary(self) -> dict:
        return {
            disaster_type: {
                event_id: {
                    "scenes": len(ev.scenes),
                    "buildings": ev.building_count,
                }
                for event_id, ev in events.items()
            }
            for disaster_type, events in self.by_type.items()
        }


def build_catalog(root: str | Path) -> EventCatalog:
    """Walk `<root>/events/<event_id>/{images,labels}` into an EventCatalog.

    Grouping is disaster_type -> event -> scene with deterministic
    lexicographic ordering; an event whose label files disagree on
    disaster_type is rejected.
    """
    root = Path(root)
    events_dir = root / "events"
    if not events_dir.is_dir():
        raise EmptyCatalog(f"no events/ directory under {root}")

    events: list[Event] = []
    for event_dir in sorted(p for p in events_dir.iterdir() if p.is_dir()):
        label_files = sorted((event_dir / "labels").glob("*.json"))
        label_files = [p for p in label_files if not p.name.endswith(".geo.json")]
        if not label_files:
            continue
        event = None
        for label_path in label_files:
            buildings = parse_label_file(label_path.read_text())
            if not buildings:
                continue
            disaster_type = buildings[0].disaster_type
            scene_id = buildings[0].scene_id
            if event is None:
                event = Event(event_id=event_dir.name, disaster_type=disaster_type)
            elif event.disaster_type != disaster_type:
                raise MixedDisasterTypesInEvent(
                    f"event {event_dir.name!r} mixes {event.disaster_type!r} and {disaster_type!r}"
                )
            event.scenes[scene_id] = SceneEntry(
                scene_id=scene_id,
                image_path=event_dir / "images" / f"{scene_id}.png",
                buildings=buildings,
            )
        if event is not None:
            events.append(event)

    if not events:
        raise EmptyCatalog(f"no labeled events under {events_dir}")

    by_type: dict[str, dict[str, Event]] = defaultdict(dict)
    for ev in sorted(events, key=lambda e: (e.disaster_type, e.event_id)):
        by_type[ev.disaster_type][ev.event_id] = ev
    return EventCatalog(by_type=dict(by_type))


def split(catalog: EventCatalog, ratio: float, seed: int
          ) -> tuple[list[LabeledBuilding], list[LabeledBuilding]]:
    """Deterministic building-level split, stratified by disaster type.

    Unclassified buildings are dropped first; every remaining building lands
    in exactly one side. Strata with fewer than 2 buildings cannot be split.
    """
    if not (0.0 < ratio < 1.0):
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")

    strata: dict[str, list[LabeledBuilding]] = defaultdict(list)
    for b in filter_training(catalog.all_buildings()):
        strata[b.disaster_type].append(b)

    train: list[LabeledBuilding] = []
    val: list[LabeledBuilding] = []
    for disaster_type in sorted(strata):
        buildings = strata[disaster_type]
        n = len(buildings)
        if n < 2:
            raise InsufficientData(
                f"stratum {disaster_type!r} has {n} building(s); need >= 2 to split"
            )
        rng = np.random.default_rng([seed, len(disaster_type), *disaster_type.encode()])
        order = rng.permutation(n)
        n_train = min(max(int(ratio * n), 1), n - 1)
        train.extend(buildings[i] for i in sorted(order[:n_train]))
        val.extend(buildings[i] for i in sorted(order[n_train:]))
    return train, val
