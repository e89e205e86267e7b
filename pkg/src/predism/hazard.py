"""Hazard intensity scoring.

Impact attributes (fatalities, disrupted days, ...) are converted to a
level 1..5 per attribute via a threshold table, then averaged into the
overall hazard level used by the model's meta inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from typing import Mapping, Optional

from .errors import (
    IncompleteRow,
    NegativeValue,
    NoAttributes,
    NonMonotoneRow,
    UnknownAttribute,
)

# Attribute rows: thresholds for levels 5, 4, 3, 2, 1. A value scores the
# highest level whose threshold it strictly exceeds; below everything it
# floors at level 1 (the scale has no level 0).
DEFAULT_THRESHOLDS: dict[str, tuple[float, float, float, float, float]] = {
    "fatality": (10000, 1000, 100, 10, 1),
    "injury": (100000, 10000, 1000, 100, 10),
    "land_impaired": (500, 100, 50, 10, 1),
    "direct_damage": (100, 10, 1, 0.1, 0.01),
    "indirect_damage": (100, 10, 1, 0.1, 0.01),
    "water_disruption": (30, 14, 7, 3, 1),
    "energy_disruption": (30, 14, 7, 3, 1),
}

ATTRIBUTE_NAMES = tuple(DEFAULT_THRESHOLDS)

MIN_LEVEL = 1
MAX_LEVEL = 5


@dataclass(frozen=True)
class HazardAttributes:
    """Analyst-supplied impact estimates; absent means unknown, not zero."""

    fatality: Optional[float] = None
    injury: Optional[float] = None
    land_impaired: Optional[float] = None
    direct_damage: Optional[float] = None
    indirect_damage: Optional[float] = None
    water_disruption: Optional[float] = None
    energy_disruption: Optional[float] = None

    def __post_init__(self) -> None:
        present = self.present()
        if not present:
            raise NoAttributes("at least one hazard attribute must be present")
        for name, value in present.items():
            if value < 0:
                raise NegativeValue(f"{name} must be >= 0, got {value}")

    def present(self) -> dict[str, float]:
        """Attributes that were actually supplied, in declaration order."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                out[f.name] = float(value)
        return out

    @classmethod
    def from_mapping(cls, data: Mapping[str, float]) -> "HazardAttributes":
        unknown = set(data) - set(ATTRIBUTE_NAMES)
        if unknown:
            raise UnknownAttribute(f"unknown hazard attribute(s): {sorted(unknown)}")
        return cls(**data)


class ThresholdTable:
    """Per-attribute descending thresholds for levels 5..1."""

    def __init__(self, rows: Mapping[str, tuple[float, ...]]):
        validated = {}
        for name, row in rows.items():
            if name not in ATTRIBUTE_NAMES:
                raise UnknownAttribute(f"unknown hazard attribute: {name!r}")
            row = tuple(float(v) for v in row)
            if len(row) != 5:
                raise IncompleteRow(f"{name}: expected 5 thresholds, got {len(row)}")
            if any(not math.isfinite(v) for v in row):
                raise IncompleteRow(f"{name}: thresholds must be finite")
            if any(a <= b for a, b in zip(row, row[1:])):
                raise NonMonotoneRow(f"{name}: thresholds must strictly decrease, got {row}")
            validated[name] = row
        missing = set(ATTRIBUTE_NAMES) - set(validated)
        if missing:
            raise IncompleteRow(f"missing attribute row(s): {sorted(missing)}")
        self._rows = validated

    def row(self, kind: str) -> tuple[float, ...]:
        if kind not in self._rows:
            raise UnknownAttribute(f"unknown hazard attribute: {kind!r}")
        return self._rows[kind]

    def as_dict(self) -> dict[str, list[float]]:
        return {name: list(row) for name, row in self._rows.items()}


def load_thresholds(config: Mapping[str, object] | str | None = None) -> ThresholdTable:
    """Build the threshold table, optionally overriding whole rows.

    ``config`` may be a mapping {attribute: [t5, t4, t3, t2, t1]} or a JSON
    string of the same shape. Overrides replace complete rows; everything
    else keeps its default.
    """
    rows = dict(DEFAULT_THRESHOLDS)
    if config:
        if isinstance(config, str):
            config = json.loads(config)
        for name, row in config.items():
            if name not in ATTRIBUTE_NAMES:
                raise UnknownAttribute(f"unknown hazard attribute: {name!r}")
            if not isinstance(row, (list, tuple)):
                raise IncompleteRow(f"{name}: override must be a 5-element array")
            rows[name] = tuple(row)
    return ThresholdTable(rows)


def score_attribute(kind: str, value: float, table: ThresholdTable | None = None) -> int:
    """Level 1..5 for a single attribute: highest L with value > threshold(L).

    Values exceeding no threshold floor at 1.
    """
    if table is None:
        table = load_thresholds()
    row = table.row(kind)
    if value < 0:
        raise NegativeValue(f"{kind} must be >= 0, got {value}")
    for level, threshold in zip((5, 4, 3, 2, 1), row):
        if value > threshold:
            return level
    return MIN_LEVEL


def overall_level(attrs: HazardAttributes, table: ThresholdTable | None = None) -> int:
    """Mean of the present per-attribute levels, rounded half-up, clamped to 1..5."""
    if table is None:
        table = load_thresholds()
    present = attrs.present()
    levels = [score_attribute(name, value, table) for name, value in present.items()]
    mean = sum(levels) / len(levels)
    rounded = math.floor(mean + 0.5)
    return max(MIN_LEVEL, min(MAX_LEVEL, rounded))


def attribute_levels(attrs: HazardAttributes, table: ThresholdTable | None = None) -> dict[str, int]:
    """Per-attribute levels for the present attributes only."""
    if table is None:
        table = load_thresholds()
    return {name: score_attribute(name, value, table) for name, value in attrs.present().items()}
