"""Compact per-chip descriptors and the meta input layout.

The 17-number feature vector stands in for a CNN embedding at desk scale;
the 15-number meta vector carries disaster type and hazard intensities and
is fused with image features downstream, never mixed into pixels.
"""

from __future__ import annotations

from typing import Mapping, Optional

import numpy as np

from .dataset import DISASTER_TYPES
from .errors import UnknownDisasterType
from .hazard import ATTRIBUTE_NAMES
from .rastergeom import Chip

# feature layout: mean RGB (3), std RGB (3), edge density, area fraction,
# compactness, 8-bin luminance histogram
FEATURE_DIM = 17
HIST_BINS = 8
EDGE_THRESHOLD = 0.1

# meta layout: one-hot disaster type (7), overall hazard level / 5,
# per-attribute levels / 5 (0 when absent)
META_DIM = len(DISASTER_TYPES) + 1 + len(ATTRIBUTE_NAMES)
DESIGN_DIM = FEATURE_DIM + META_DIM

# index of the overall-hazard entry within the combined design vector;
# the ordinal head constrains its weight to be >= 0
HAZARD_ENTRY_INDEX = FEATURE_DIM + len(DISASTER_TYPES)

_LUMA = np.array([0.299, 0.587, 0.114])


def luminance(pixels: np.ndarray) -> np.ndarray:
    """Per-pixel luminance on [0, 1] from uint8 RGB."""
    return (np.asarray(pixels, dtype=np.float64) / 255.0) @ _LUMA


def edge_density(lum: np.ndarray, threshold: float = EDGE_THRESHOLD) -> float:
    """Fraction of pixels whose central-difference gradient magnitude exceeds
    the threshold. Central differences need both neighbors, so border pixels
    never count; the denominator is the full pixel count.
    """
    h, w = lum.shape
    if h < 3 or w < 3:
        return 0.0
    gx = (lum[1:-1, 2:] - lum[1:-1, :-2]) / 2.0
    gy = (lum[2:, 1:-1] - lum[:-2, 1:-1]) / 2.0
    magnitude = np.sqrt(gx * gx + gy * gy)
    return float(np.count_nonzero(magnitude > threshold)) / (h * w)


def extract_features(chip: Chip) -> np.ndarray:
    """Deterministic 17-number descriptor of a chip."""
    px = chip.pixels.astype(np.float64) / 255.0
    lum = px @ _LUMA

    means = px.mean(axis=(0, 1))
    stds = px.std(axis=(0, 1))
    hist = np.bincount(
        np.minimum((lum * HIST_BINS).astype(np.int64).ravel(), HIST_BINS - 1),
        minlength=HIST_BINS,
    ).astype(np.float64)
    hist /= lum.size

    vec = np.empty(FEATURE_DIM, dtype=np.float64)
    vec[0:3] = means
    vec[3:6] = stds
    vec[6] = edge_density(lum)
    vec[7] = chip.area_fraction
    vec[8] = chip.compactness
    vec[9:] = hist
    return vec


def meta_vector(disaster_type: str, overall_level: int,
                attr_levels: Optional[Mapping[str, int]] = None) -> np.ndarray:
    """Meta inputs as a 15-number vector, everything scaled into [0, 1].

    Absent attributes encode 0 (unknown), which is distinct from the minimum
    level 1/5.
    """
    if disaster_type not in DISASTER_TYPES:
        raise UnknownDisasterType(f"unknown disaster type {disaster_type!r}")
    if not 1 <= overall_level <= 5:
        raise ValueError(f"overall hazard level must be in 1..5, got {overall_level}")

    vec = np.zeros(META_DIM, dtype=np.float64)
    vec[DISASTER_TYPES.index(disaster_type)] = 1.0
    vec[len(DISASTER_TYPES)] = overall_level / 5.0
    if attr_levels:
        base = len(DISASTER_TYPES) + 1
        for name, level in attr_levels.items():
            if name not in ATTRIBUTE_NAMES:
                raise ValueError(f"unknown hazard attribute {name!r}")
            if not 1 <= level <= 5:
                raise ValueError(f"{name} level must be in 1..5, got {level}")
            vec[base + ATTRIBUTE_NAMES.index(name)] = level / 5.0
    return vec


def design_vector(features: np.ndarray, meta: np.ndarray) -> np.ndarray:
    """Concatenate image features and meta inputs into the head's input."""
    return np.concatenate([features, meta])
