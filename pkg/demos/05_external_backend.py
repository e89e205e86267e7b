"""Plugging an external model in as a backbone.

Spawns stub_backend.py as a child process speaking the line-delimited JSON
protocol, mixes it with the in-process reference head through a
co-occurrence routing matrix, and shows the failure contract.
"""

import sys
from pathlib import Path

import numpy as np

from predism import (
    DISASTER_TYPES,
    BackboneRegistry,
    ReferenceOrdinalBackbone,
    SubprocessBackbone,
    default_ordinal_head,
    ensemble_predict,
    meta_vector,
    route,
)
from predism.errors import BackboneFailure
from predism.synthetic import constant_chip

STUB = Path(__file__).parent / "stub_backend.py"

chip = constant_chip((0.35, 0.45, 0.55), size=64, building_id="hq")
meta = meta_vector("flood", 4)

print("== subprocess backbone ==")
external = SubprocessBackbone([sys.executable, str(STUB)], "flood", timeout_ms=5000)
try:
    logits = external.logits(chip, meta)
    print(f"stub logits:   {np.round(logits, 3)}")
    print(f"stub probs:    {np.round(external.predict_probs(chip, meta), 3)}")

    print("\n== mixed with the reference head via co-occurrence routing ==")
    co = np.zeros((7, 7))
    i_flood = DISASTER_TYPES.index("flood")
    i_hurricane = DISASTER_TYPES.index("hurricane")
    co[i_flood, i_flood] = 3.0
    co[i_flood, i_hurricane] = co[i_hurricane, i_flood] = 1.0
    co[i_hurricane, i_hurricane] = 1.0
    registry = BackboneRegistry({
        "flood": external,
        "hurricane": ReferenceOrdinalBackbone(default_ordinal_head(), "hurricane"),
    }, co_occurrence=co)

    weights = route("flood", registry)
    print(f"routing weights: {weights}")
    mixed = ensemble_predict(chip, meta, registry, weights)
    print(f"mixture probs:  {np.round(mixed, 3)} (sum {mixed.sum():.6f})")
finally:
    external.close()

print("\n== timeout contract ==")
slow = SubprocessBackbone([sys.executable, str(STUB)], "flood", timeout_ms=1)
try:
    slow.logits(chip, meta)
except BackboneFailure as e:
    print(f"BackboneFailure as expected: {e}")
finally:
    slow.close()
