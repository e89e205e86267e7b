"""Scene geometry: WKT footprints, polygon masks, per-building chips.

Coordinates follow image convention: x grows right (columns), y grows down
(rows). Pixel (i, j) covers [i, i+1) x [j, j+1) with center (i+0.5, j+0.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyFootprint, MalformedWkt, NoValidFootprints

Ring = list[tuple[float, float]]

DEFAULT_CHIP_SIZE = 64


@dataclass(frozen=True)
class GeoBounds:
    lat_min: float
    lat_max: float
    lng_min: float
    lng_max: float

    def __post_init__(self) -> None:
        if not (self.lat_min < self.lat_max):
            raise ValueError(f"lat_min must be < lat_max, got {self.lat_min} >= {self.lat_max}")
        if not (self.lng_min < self.lng_max):
            raise ValueError(f"lng_min must be < lng_max, got {self.lng_min} >= {self.lng_max}")

    def as_dict(self) -> dict[str, float]:
        return {
            "lat_min": self.lat_min,
            "lat_max": self.lat_max,
            "lng_min": self.lng_min,
            "lng_max": self.lng_max,
        }


@dataclass
class Scene:
    """An 8-bit RGB raster, optionally georeferenced."""

    pixels: np.ndarray
    scene_id: str
    geo_bounds: Optional[GeoBounds] = None

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"scene pixels must be (h, w, 3), got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("scene must be at least 1x1")
        self.pixels = px.astype(np.uint8, copy=False)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class Footprint:
    """Building boundary: one outer ring plus optional hole rings, closed."""

    building_id: str
    rings: tuple[tuple[tuple[float, float], ...], ...]

    def __post_init__(self) -> None:
        if not self.rings:
            raise MalformedWkt("footprint needs at least an outer ring")
        for ring in self.rings:
            if ring[0] != ring[-1]:
                raise MalformedWkt("rings must be closed (first vertex == last vertex)")
            if len(set(ring[:-1])) < 3:
                raise MalformedWkt("each ring needs at least 3 distinct vertices")

    @property
    def outer(self) -> tuple[tuple[float, float], ...]:
        return self.rings[0]


@dataclass
class Chip:
    """Fixed-size image of a single masked building."""

    pixels: np.ndarray  # (S, S, 3) uint8
    building_id: str
    scene_id: str
    area_fraction: float
    compactness: float

    @property
    def size(self) -> int:
        return self.pixels.shape[0]


@dataclass
class ChipSet:
    chips: list[Chip]
    skipped: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.chips)


# --- WKT parsing ---


def parse_wkt(text: str, building_id: str = "") -> Footprint:
    """Parse a WKT POLYGON into a Footprint, enforcing ring closure.

    Only 2D POLYGON geometries are accepted; coordinates are preserved as
    parsed. Unbalanced parentheses, non-numeric coordinates, and rings with
    fewer than 3 distinct vertices raise MalformedWkt.
    """
    if not isinstance(text, str):
        raise MalformedWkt(f"expected WKT string, got {type(text).__name__}")
    s = text.strip()
    upper = s.upper()
    if not upper.startswith("POLYGON"):
        raise MalformedWkt(f"not a POLYGON expression: {s[:40]!r}")
    body = s[len("POLYGON"):].strip()
    if body.upper() == "EMPTY":
        raise MalformedWkt("POLYGON EMPTY has no rings")
    if not body.startswith("(") or not body.endswith(")"):
        raise MalformedWkt("unbalanced parentheses")
    if body.count("(") != body.count(")"):
        raise MalformedWkt("unbalanced parentheses")

    ring_texts = _split_rings(body[1:-1])
    rings = []
    for ring_text in ring_texts:
        ring: Ring = []
        for vertex_text in ring_text.split(","):
            parts = vertex_text.split()
            if len(parts) != 2:
                raise MalformedWkt(f"expected 'x y' vertex, got {vertex_text.strip()!r}")
            try:
                ring.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise MalformedWkt(f"non-numeric coordinate in {vertex_text.strip()!r}") from None
        if ring[0] != ring[-1]:
            ring.append(ring[0])
        rings.append(tuple(ring))
    return Footprint(building_id=building_id, rings=tuple(rings))


def _split_rings(inner: str) -> list[str]:
    """Split '(...), (...)' into ring bodies, checking paren balance."""
    rings = []
    depth = 0
    start = None
    for pos, ch in enumerate(inner):
        if ch == "(":
            depth += 1
            if depth == 1:
                start = pos + 1
            elif depth > 1:
                raise MalformedWkt("nested parentheses inside ring")
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise MalformedWkt("unbalanced parentheses")
            if depth == 0:
                rings.append(inner[start:pos])
        elif depth == 0 and ch not in ", \t\r\n":
            raise MalformedWkt(f"unexpected character {ch!r} between rings")
    if depth != 0:
        raise MalformedWkt("unbalanced parentheses")
    if not rings:
        raise MalformedWkt("polygon has no rings")
    return rings


def footprint_to_wkt(fp: Footprint) -> str:
    rings = ", ".join(
        "(" + ", ".join(f"{x:g} {y:g}" for x, y in ring) + ")" for ring in fp.rings
    )
    return f"POLYGON ({rings})"


# --- rasterization ---


def rasterize(fp: Footprint, width: int, height: int) -> np.ndarray:
    """Even-odd rasterization of a footprint onto a (height, width) bit mask.

    A pixel is set iff its center lies inside the polygon under the even-odd
    rule; all rings contribute, so holes subtract by parity. Centers exactly
    on a boundary follow the half-open convention: top and left edges claim
    the pixel, bottom and right edges do not, so adjacent disjoint polygons
    never double-claim.
    """
    if width < 1 or height < 1:
        raise ValueError("raster dimensions must be >= 1")
    mask = np.zeros((height, width), dtype=bool)

    edges = []
    for ring in fp.rings:
        for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
            if y1 != y2:  # horizontal edges never cross a scanline
                edges.append((x1, y1, x2, y2))
    if not edges:
        return mask

    ex1, ey1, ex2, ey2 = (np.array(v, dtype=np.float64) for v in zip(*edges))
    ymin = np.minimum(ey1, ey2)
    ymax = np.maximum(ey1, ey2)
    centers_x = np.arange(width, dtype=np.float64) + 0.5

    for j in range(height):
        y = j + 0.5
        crossing = (ymin <= y) & (y < ymax)
        if not crossing.any():
            continue
        x1, y1 = ex1[crossing], ey1[crossing]
        x2, y2 = ex2[crossing], ey2[crossing]
        xs = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        xs.sort()
        # crossings at x <= center toggle parity: a center exactly on a left
        # edge is inside, on a right edge outside
        mask[j] = np.searchsorted(xs, centers_x, side="right") % 2 == 1
    return mask


def point_in_polygon(fp: Footprint, x: float, y: float) -> bool:
    """Even-odd test for a single point, same tie-break as rasterize.

    Counts edge crossings of the leftward ray from (x, y); kept as the
    brute-force reference for the scanline implementation.
    """
    crossings = 0
    for ring in fp.rings:
        for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
            if y1 == y2:
                continue
            if min(y1, y2) <= y < max(y1, y2):
                x_int = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                if x_int <= x:
                    crossings += 1
    return crossings % 2 == 1


def mask_perimeter(mask: np.ndarray) -> int:
    """Total exposed pixel-edge length: set-pixel sides facing off pixels or the border."""
    m = np.asarray(mask, dtype=bool)
    padded = np.pad(m, 1, constant_values=False)
    core = padded[1:-1, 1:-1]
    count = 0
    for shifted in (padded[:-2, 1:-1], padded[2:, 1:-1], padded[1:-1, :-2], padded[1:-1, 2:]):
        count += int(np.sum(core & ~shifted))
    return count


def mask_compactness(mask: np.ndarray) -> float:
    """Isoperimetric ratio perimeter^2 / (4*pi*area); 0 for an empty mask."""
    area = int(np.count_nonzero(mask))
    if area == 0:
        return 0.0
    perimeter = mask_perimeter(mask)
    return perimeter * perimeter / (4.0 * math.pi * area)


# --- chip extraction ---


def resize_bilinear(pixels: np.ndarray, out_size: int) -> np.ndarray:
    """Bilinear resampling with half-pixel-center alignment, uint8 in and out.

    Rounds half-to-even after float64 interpolation; evaluation order matches
    the scalar formula (1-fy)*((1-fx)*a + fx*b) + fy*((1-fx)*c + fx*d) so a
    per-pixel reference implementation reproduces identical bytes.
    """
    src = np.asarray(pixels, dtype=np.float64)
    in_h, in_w = src.shape[0], src.shape[1]

    sy = np.clip((np.arange(out_size, dtype=np.float64) + 0.5) * (in_h / out_size) - 0.5, 0.0, in_h - 1.0)
    sx = np.clip((np.arange(out_size, dtype=np.float64) + 0.5) * (in_w / out_size) - 0.5, 0.0, in_w - 1.0)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (sy - y0)[:, None, None]
    fx = (sx - x0)[None, :, None]

    a = src[y0[:, None], x0[None, :]]
    b = src[y0[:, None], x1[None, :]]
    c = src[y1[:, None], x0[None, :]]
    d = src[y1[:, None], x1[None, :]]
    out = (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * d)
    return np.rint(out).astype(np.uint8)


def extract_chip(scene: Scene, mask: np.ndarray, out_size: int = DEFAULT_CHIP_SIZE,
                 building_id: str = "", ) -> Chip:
    """Cut one building out of a scene: zero background, crop to the mask
    bounding box, pad to square, resample to out_size.
    """
    if out_size < 8:
        raise ValueError(f"out_size must be >= 8, got {out_size}")
    m = np.asarray(mask, dtype=bool)
    if m.shape != (scene.height, scene.width):
        raise ValueError(f"mask shape {m.shape} != scene shape {(scene.height, scene.width)}")
    set_count = int(np.count_nonzero(m))
    if set_count == 0:
        raise EmptyFootprint(f"footprint {building_id!r} covers no pixels")

    masked = scene.pixels * m[:, :, None].astype(np.uint8)
    rows = np.flatnonzero(m.any(axis=1))
    cols = np.flatnonzero(m.any(axis=0))
    crop = masked[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]

    h, w = crop.shape[0], crop.shape[1]
    side = max(h, w)
    square = np.zeros((side, side, 3), dtype=np.uint8)
    top = (side - h) // 2
    left = (side - w) // 2
    square[top:top + h, left:left + w] = crop

    return Chip(
        pixels=resize_bilinear(square, out_size),
        building_id=building_id,
        scene_id=scene.scene_id,
        area_fraction=set_count / (scene.width * scene.height),
        compactness=mask_compactness(m),
    )


def chip_set(scene: Scene, footprints: Sequence[Footprint],
             out_size: int = DEFAULT_CHIP_SIZE) -> ChipSet:
    """One chip per footprint with a non-empty mask, input order preserved."""
    if not footprints:
        raise NoValidFootprints("no footprints supplied")
    chips: list[Chip] = []
    skipped: list[str] = []
    for fp in footprints:
        mask = rasterize(fp, scene.width, scene.height)
        if not mask.any():
            skipped.append(fp.building_id)
            continue
        chips.append(extract_chip(scene, mask, out_size, building_id=fp.building_id))
    if not chips:
        raise NoValidFootprints(f"all {len(footprints)} footprints rasterized empty")
    return ChipSet(chips=chips, skipped=skipped)
