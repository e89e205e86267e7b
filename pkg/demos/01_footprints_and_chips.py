"""Footprints to chips: WKT parsing, rasterization, per-building extraction.

Walks the geometry layer end to end on a synthetic town and writes the
intermediate artifacts (masks, chips) to demos/out/01/.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from predism import chip_set, parse_wkt, rasterize
from predism.synthetic import synthetic_scene

OUT = Path(__file__).parent / "out" / "01"
OUT.mkdir(parents=True, exist_ok=True)

print("== parse a WKT footprint ==")
fp = parse_wkt("POLYGON ((12 10, 44 10, 44 30, 12 30, 12 10), (20 15, 30 15, 30 22, 20 22, 20 15))",
               building_id="warehouse")
print(f"rings: {len(fp.rings)} (outer + {len(fp.rings) - 1} hole)")
print(f"outer vertices: {fp.outer}")

print("\n== rasterize it onto a 56x40 grid ==")
mask = rasterize(fp, 56, 40)
print(f"set pixels: {int(mask.sum())} (hole subtracted)")
Image.fromarray((mask * 255).astype(np.uint8)).save(OUT / "warehouse_mask.png")

print("\n== chip a whole synthetic town ==")
scene, footprints, grays = synthetic_scene(n_buildings=16, size=192, seed=4, scene_id="demo-town")
chips = chip_set(scene, footprints, out_size=64)
print(f"{len(footprints)} footprints -> {len(chips.chips)} chips, skipped={chips.skipped}")

sheet = np.zeros((4 * 64, 4 * 64, 3), dtype=np.uint8)
for k, chip in enumerate(chips.chips):
    row, col = divmod(k, 4)
    sheet[row * 64:(row + 1) * 64, col * 64:(col + 1) * 64] = chip.pixels
Image.fromarray(sheet).save(OUT / "chip_sheet.png")
Image.fromarray(scene.pixels).save(OUT / "town.png")

for chip in chips.chips[:4]:
    print(f"  {chip.building_id}: area_fraction={chip.area_fraction:.4f} "
          f"compactness={chip.compactness:.2f}")
print(f"\nartifacts in {OUT}")
