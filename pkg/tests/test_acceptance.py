"""Acceptance gate: one test per release criterion, at the stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion.
"""

import json
import sys
import time
import urllib.request
import urllib.error
from pathlib import Path

import numpy as np
import pytest

from predism.backbones import (
    BackboneRegistry,
    ReferenceOrdinalBackbone,
    SubprocessBackbone,
    ensemble_predict,
)
from predism.cli import main
from predism.config import AppConfig
from predism.damagemap import DamageModel, sweep
from predism.dataset import DISASTER_TYPES, DamageClass, build_catalog, filter_training
from predism.errors import BackboneFailure
from predism.features import DESIGN_DIM, meta_vector
from predism.hazard import ATTRIBUTE_NAMES, HazardAttributes, load_thresholds, overall_level, score_attribute
from predism.heads import (
    classify,
    cross_entropy,
    default_ordinal_head,
    neutral_ordinal_head,
    ordinal_cross_entropy,
    ordinal_probs,
    predicted_level,
    softmax,
)
from predism.rastergeom import point_in_polygon, rasterize
from predism.service import serve
from predism.synthetic import constant_chip, separable_set, synthetic_scene, write_event
from predism.training import TrainConfig, accuracy, loss_and_grad, train

ECHO = Path(__file__).parent / "backends" / "echo_backend.py"


def _report(name):
    print(f"\nACCEPTANCE {name}: PASS")


def test_hazard_table_boundary_oracle():
    started = time.perf_counter()
    table = load_thresholds()
    pairs = 0
    for kind in ATTRIBUTE_NAMES:
        row = table.row(kind)
        for level, threshold in zip((5, 4, 3, 2), row[:4]):
            assert score_attribute(kind, threshold, table) == level - 1
            assert score_attribute(kind, threshold * (1 + 1e-9), table) == level
            pairs += 1
    assert pairs == 28
    assert time.perf_counter() - started < 1.0
    _report("hazard table oracle (28 boundary pairs)")


def test_mean_of_meta_rule():
    started = time.perf_counter()
    # per-attribute levels [5,4,3,2,1,1,1] -> mean 17/7 -> 2
    attrs = HazardAttributes(
        fatality=15000, injury=20000, land_impaired=60, direct_damage=0.5,
        indirect_damage=0.005, water_disruption=0.5, energy_disruption=0.2,
    )
    table = load_thresholds()
    assert [score_attribute(k, v, table) for k, v in attrs.present().items()] == [5, 4, 3, 2, 1, 1, 1]
    assert overall_level(attrs, table) == 2

    rng = np.random.default_rng(123)
    for _ in range(1000):
        names = list(rng.choice(ATTRIBUTE_NAMES, size=rng.integers(1, 8), replace=False))
        values = {name: float(rng.uniform(0, 2e5)) for name in names}
        base = overall_level(HazardAttributes.from_mapping(values), table)
        order = list(values.items())
        rng.shuffle(order)
        assert overall_level(HazardAttributes.from_mapping(dict(order)), table) == base
    assert time.perf_counter() - started < 1.0
    _report("mean-of-meta rule + permutation invariance (1000 sets)")


def _random_polygon(rng, width, height, max_vertices=8):
    from predism.rastergeom import Footprint

    n = rng.integers(3, max_vertices + 1)
    cx = rng.uniform(1, width - 1)
    cy = rng.uniform(1, height - 1)
    angles = np.sort(rng.uniform(0, 2 * np.pi, size=n))
    radii = rng.uniform(0.5, min(width, height) / 2, size=n)
    points = [(cx + r * np.cos(a), cy + r * np.sin(a)) for r, a in zip(radii, angles)]
    points.append(points[0])
    return Footprint("rand", (tuple(points),))


def test_rasterization_equivalence():
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(200):
        width = int(rng.integers(2, 33))
        height = int(rng.integers(2, 33))
        fp = _random_polygon(rng, width, height)
        mask = rasterize(fp, width, height)
        brute = np.array([
            [point_in_polygon(fp, i + 0.5, j + 0.5) for i in range(width)]
            for j in range(height)
        ], dtype=bool)
        mismatches += int(np.sum(mask != brute))
    assert mismatches == 0
    _report("rasterization equals brute-force even-odd test (200 polygons)")


def test_loss_and_head_numerics():
    rng = np.random.default_rng(99)

    for _ in range(200):
        logits = rng.normal(0, 3, size=5)
        shift = rng.normal(0, 50)
        np.testing.assert_allclose(softmax(logits), softmax(logits + shift), atol=1e-12)

    equal_cases = 0
    for _ in range(1000):
        probs = rng.dirichlet(np.ones(5))
        y = int(rng.integers(1, 6))
        ce = cross_entropy(probs, y)
        oce = ordinal_cross_entropy(probs, y)
        if predicted_level(probs) == y:
            assert oce == pytest.approx(ce, abs=1e-12)
            equal_cases += 1
        else:
            assert oce > ce
    assert 0 < equal_cases < 1000

    for _ in range(200):
        theta = np.cumsum(rng.uniform(0.1, 2.0, size=4)) - 2.0
        probs = ordinal_probs(rng.normal(0, 5), theta)
        assert abs(probs.sum() - 1.0) <= 1e-9

    h = 1e-6
    for _ in range(20):
        X = rng.normal(0, 1, size=(8, DESIGN_DIM))
        y = rng.integers(1, 6, size=8)
        w = rng.normal(0, 0.5, size=DESIGN_DIM)
        theta = np.sort(rng.normal(0, 1.5, size=4)) + np.arange(4) * 0.05
        loss_kind = "ordinal-ce" if rng.random() < 0.5 else "ce"
        _, grad_w, grad_theta = loss_and_grad(w, theta, X, y, loss_kind)
        grad = np.concatenate([grad_w, grad_theta])
        fd = np.empty_like(grad)
        for k in range(grad.size):
            def at(delta, k=k):
                w2, t2 = w.copy(), theta.copy()
                if k < DESIGN_DIM:
                    w2[k] += delta
                else:
                    t2[k - DESIGN_DIM] += delta
                return loss_and_grad(w2, t2, X, y, loss_kind)[0]
            fd[k] = (at(h) - at(-h)) / (2 * h)
        rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)
        assert rel < 1e-4
    _report("loss/head numerics (shift invariance, ordinal-CE >= CE, FD gradients)")


def test_sweep_monotonicity_100_buildings():
    scene, footprints, _ = synthetic_scene(100, size=480, seed=42, scene_id="acc-town")
    registry = BackboneRegistry({
        t: ReferenceOrdinalBackbone(default_ordinal_head(), t) for t in DISASTER_TYPES
    })
    model = DamageModel(registry=registry)
    maps = sweep(scene, footprints, "flood", [1, 2, 3, 4, 5], model)
    assert all(len(m.entries) == 100 for m in maps)

    violations = 0
    per_level = [m.expected_levels() for m in maps]
    for bid in per_level[0]:
        series = [levels[bid] for levels in per_level]
        violations += sum(1 for a, b in zip(series, series[1:]) if a > b + 1e-12)
    assert violations == 0
    _report("expected damage level nondecreasing over levels 1..5 (100 buildings)")


def test_desk_scale_learning():
    started = time.perf_counter()
    full = separable_set(n=625, seed=7)
    X, y = full.design_matrix()
    X_train, y_train = X[:500], y[:500]
    X_held, y_held = X[500:], y[500:]

    cfg = TrainConfig(epochs=20, lr=0.001, gamma=0.1, step_size=7, seed=7)
    head, history = train(neutral_ordinal_head(), (X_train, y_train), cfg)
    elapsed = time.perf_counter() - started

    train_acc = accuracy(head, X_train, y_train)
    held_acc = accuracy(head, X_held, y_held)
    assert len(history) == 20
    assert train_acc >= 0.95, train_acc
    assert held_acc >= 0.85, held_acc
    assert elapsed < 60.0
    _report(f"desk-scale learning (train {train_acc:.3f}, held-out {held_acc:.3f}, {elapsed:.1f}s)")


def test_pipeline_determinism(tmp_path):
    root = tmp_path / "data"
    write_event(root, "det-flood", "flood", buildings_per_scene=16, seed=5, scene_size=128)
    scene = str(root / "events" / "det-flood" / "images" / "det-flood_s0.png")
    labels = str(root / "events" / "det-flood" / "labels" / "det-flood_s0.json")

    outs = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        code = main(["sweep", "--scene", scene, "--labels", labels,
                     "--type", "flood", "--levels", "3,4,5", "--out", str(out)])
        assert code == 0
        outs.append(out)
    for level in (3, 4, 5):
        for suffix in ("geojson", "png"):
            a = (outs[0] / f"level{level}.{suffix}").read_bytes()
            b = (outs[1] / f"level{level}.{suffix}").read_bytes()
            assert a == b
    _report("two sweep runs produce byte-identical GeoJSON and PNG artifacts")


def test_external_backend_protocol(tmp_path):
    chip = constant_chip((0.3, 0.5, 0.7), size=16)
    meta = meta_vector("flood", 3)

    flood_logits = [2.0, 1.0, 0.0, 0.0, 0.0]
    hurricane_logits = [0.0, 0.0, 0.0, 1.0, 2.0]
    flood_backbone = SubprocessBackbone(
        [sys.executable, str(ECHO), "--logits", "2,1,0,0,0"], "flood")
    hurricane_backbone = SubprocessBackbone(
        [sys.executable, str(ECHO), "--logits", "0,0,0,1,2"], "hurricane")
    try:
        registry = BackboneRegistry({"flood": flood_backbone, "hurricane": hurricane_backbone})
        mixed = ensemble_predict(chip, meta, registry, {"flood": 0.8, "hurricane": 0.2})
        expected = 0.8 * softmax(np.array(flood_logits)) + 0.2 * softmax(np.array(hurricane_logits))
        np.testing.assert_allclose(mixed, expected, atol=1e-12)
    finally:
        flood_backbone.close()
        hurricane_backbone.close()

    # a timing-out backend surfaces as BackboneFailure and HTTP 500
    slow = SubprocessBackbone([sys.executable, str(ECHO), "--delay-ms", "2000"],
                              "flood", timeout_ms=200)
    try:
        with pytest.raises(BackboneFailure):
            slow.logits(chip, meta)
    finally:
        slow.close()

    root = tmp_path / "data"
    write_event(root, "ext-flood", "flood", buildings_per_scene=4, seed=9, scene_size=96)
    config = AppConfig.from_dict({
        "listen": "127.0.0.1:0",
        "artifacts_dir": str(tmp_path / "artifacts"),
        "backends": {"flood": {
            "kind": "external",
            "command": [sys.executable, str(ECHO), "--delay-ms", "3000"],
            "timeout_ms": 200,
        }},
    })
    service = serve(config)
    try:
        body = json.dumps({
            "scene_path": str(root / "events" / "ext-flood" / "images" / "ext-flood_s0.png"),
            "labels_path": str(root / "events" / "ext-flood" / "labels" / "ext-flood_s0.json"),
            "disaster_type": "flood", "hazard_level": 3,
        }).encode()
        request = urllib.request.Request(
            f"http://127.0.0.1:{service.port}/predict", data=body,
            headers={"Content-Type": "application/json"})
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(request, timeout=10)
        assert err.value.code == 500
        assert json.loads(err.value.read())["error"] == "BackboneFailure"
    finally:
        service.stop()
    _report("external backend protocol (mixtures exact, timeout -> 500)")


def test_unclassified_rules(tmp_path):
    from predism.dataset import LabeledBuilding, serialize_label_file
    from predism.rastergeom import Footprint

    # corpus with exactly 20% unclassified labels
    buildings = []
    for k in range(50):
        x0 = (k % 10) * 12 + 1
        y0 = (k // 10) * 12 + 1
        fp = Footprint(f"u{k:03d}", (((x0, y0), (x0 + 9, y0), (x0 + 9, y0 + 9),
                                      (x0, y0 + 9), (x0, y0)),))
        damage = DamageClass.UNCLASSIFIED if k % 5 == 0 else \
            (DamageClass.NO_DAMAGE, DamageClass.MINOR_DAMAGE,
             DamageClass.MAJOR_DAMAGE, DamageClass.DESTROYED)[k % 4]
        buildings.append(LabeledBuilding(footprint=fp, damage=damage, event_id="uncl-ev",
                                         disaster_type="fire", scene_id="uncl-ev_s0"))
    assert sum(b.damage == DamageClass.UNCLASSIFIED for b in buildings) == 10

    root = tmp_path / "data"
    event_dir = root / "events" / "uncl-ev"
    (event_dir / "labels").mkdir(parents=True)
    (event_dir / "labels" / "uncl-ev_s0.json").write_text(serialize_label_file(buildings))
    from predism.rastergeom import Scene
    from predism.sceneio import save_scene
    save_scene(Scene(np.full((128, 128, 3), 90, dtype=np.uint8), scene_id="uncl-ev_s0"),
               event_dir / "images" / "uncl-ev_s0.png")

    catalog = build_catalog(root)
    ingested = catalog.all_buildings()
    assert len(ingested) == 50
    kept = filter_training(ingested)
    assert len(kept) == 40
    dropped = {b.building_id for b in ingested} - {b.building_id for b in kept}
    assert dropped == {b.building_id for b in buildings if b.damage == DamageClass.UNCLASSIFIED}

    from predism.training import assemble_training_set
    training = assemble_training_set(catalog)
    assert len(training.chips) == 40

    # uniform probabilities never clear the tau=0.35 confidence bar
    assert classify(np.full(5, 0.2), 0.35) is None
    _report("unclassified rules (exact 20% drop, uniform -> unclassified at tau=0.35)")
