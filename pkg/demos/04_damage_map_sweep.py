"""Hazard-level sweep: the same pre-disaster scene at intensities 1..5.

Produces one GeoJSON + one PNG choropleth per level and verifies that each
building's expected damage level only rises with the hazard level.
"""

from pathlib import Path

from predism import (
    DISASTER_TYPES,
    BackboneRegistry,
    DamageModel,
    ReferenceOrdinalBackbone,
    default_ordinal_head,
    render_png,
    sweep,
    to_geojson,
)
from predism.synthetic import synthetic_scene

OUT = Path(__file__).parent / "out" / "04"
OUT.mkdir(parents=True, exist_ok=True)

scene, footprints, _ = synthetic_scene(n_buildings=36, size=288, seed=8, scene_id="riverside")
registry = BackboneRegistry({
    t: ReferenceOrdinalBackbone(default_ordinal_head(), t) for t in DISASTER_TYPES
})
model = DamageModel(registry=registry)

levels = [1, 2, 3, 4, 5]
maps = sweep(scene, footprints, "flood", levels, model)

print("== per-level damage distribution ==")
for damage_map in maps:
    counts = {}
    for entry in damage_map.entries:
        key = str(entry.level_label())
        counts[key] = counts.get(key, 0) + 1
    print(f"  hazard {damage_map.hazard_level}: {dict(sorted(counts.items()))}")

    name = f"level{damage_map.hazard_level}"
    (OUT / f"{name}.geojson").write_text(
        to_geojson(damage_map, footprints, scene.geo_bounds, (scene.width, scene.height)))
    (OUT / f"{name}.png").write_bytes(render_png(damage_map, scene, footprints))

print("\n== monotonicity: expected level per building across the sweep ==")
per_level = [m.expected_levels() for m in maps]
violations = 0
for bid in per_level[0]:
    series = [round(levels[bid], 3) for levels in per_level]
    if any(a > b for a, b in zip(series, series[1:])):
        violations += 1
sample = list(per_level[0])[:3]
for bid in sample:
    print(f"  {bid}: {[round(lv[bid], 2) for lv in per_level]}")
print(f"violations across {len(per_level[0])} buildings: {violations}")
print(f"\nartifacts in {OUT}")
