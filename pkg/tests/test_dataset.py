import json
import random

import pytest

from predism.dataset import (
    DISASTER_TYPES,
    DamageClass,
    LabeledBuilding,
    build_catalog,
    class_to_level,
    filter_training,
    normalize_damage_class,
    parse_label_file,
    serialize_label_file,
    split,
)
from predism.errors import (
    EmptyCatalog,
    InsufficientData,
    MalformedLabelFile,
    MixedDisasterTypesInEvent,
    UnclassifiedNotMappable,
    UnknownDamageClass,
    UnknownDisasterType,
)
from predism.rastergeom import parse_wkt
from predism.synthetic import write_event


def label_doc(event="nepal-flooding-2017", dtype="flood", scene="s0", features=None):
    if features is None:
        features = [
            {"wkt": "POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0))",
             "properties": {"subtype": "no-damage", "uid": "b1"}},
            {"wkt": "POLYGON ((6 6, 9 6, 9 9, 6 9, 6 6))",
             "properties": {"subtype": "destroyed", "uid": "b2"}},
        ]
    return json.dumps({
        "metadata": {"event": event, "disaster_type": dtype, "scene_id": scene},
        "features": features,
    })


def make_building(uid, damage, dtype="flood", event="ev", scene="s"):
    fp = parse_wkt("POLYGON ((0 0, 2 0, 2 2, 0 2, 0 0))", building_id=uid)
    return LabeledBuilding(footprint=fp, damage=damage, event_id=event,
                           disaster_type=dtype, scene_id=scene)


def test_parse_label_file_basic():
    buildings = parse_label_file(label_doc())
    assert len(buildings) == 2
    assert buildings[0].damage == DamageClass.NO_DAMAGE
    assert buildings[1].damage == DamageClass.DESTROYED
    assert buildings[0].building_id == "b1"
    assert buildings[0].disaster_type == "flood"
    assert buildings[0].event_id == "nepal-flooding-2017"


def test_parse_label_file_normalizes_subtype_spelling():
    features = [
        {"wkt": "POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0))",
         "properties": {"subtype": "No Damage", "uid": "a"}},
        {"wkt": "POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0))",
         "properties": {"subtype": "minor_damage", "uid": "b"}},
    ]
    buildings = parse_label_file(label_doc(features=features))
    assert buildings[0].damage == DamageClass.NO_DAMAGE
    assert buildings[1].damage == DamageClass.MINOR_DAMAGE

    assert normalize_damage_class("Major Damage") == DamageClass.MAJOR_DAMAGE
    # disaster types normalize the same way
    doc = label_doc(dtype="Volcanic Eruption")
    assert parse_label_file(doc)[0].disaster_type == "volcanic-eruption"


def test_parse_label_file_unknown_class_and_type():
    bad_class = label_doc(features=[
        {"wkt": "POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0))",
         "properties": {"subtype": "obliterated", "uid": "x"}},
    ])
    with pytest.raises(UnknownDamageClass):
        parse_label_file(bad_class)
    with pytest.raises(UnknownDisasterType):
        parse_label_file(label_doc(dtype="meteor"))


def test_parse_label_file_malformed():
    with pytest.raises(MalformedLabelFile):
        parse_label_file("not json at all {")
    with pytest.raises(MalformedLabelFile):
        parse_label_file(json.dumps({"features": []}))
    with pytest.raises(MalformedLabelFile):
        parse_label_file(json.dumps({
            "metadata": {"event": "e", "disaster_type": "flood", "scene_id": "s"},
            "features": [{"properties": {"subtype": "no-damage", "uid": "u"}}],
        }))


def test_parse_serialize_round_trip():
    buildings = parse_label_file(label_doc())
    again = parse_label_file(serialize_label_file(buildings))
    assert len(again) == len(buildings)
    for a, b in zip(buildings, again):
        assert a.building_id == b.building_id
        assert a.damage == b.damage
        assert a.footprint.rings == b.footprint.rings
        assert (a.event_id, a.disaster_type, a.scene_id) == (b.event_id, b.disaster_type, b.scene_id)


def test_parse_label_file_large_count():
    features = [
        {"wkt": f"POLYGON (({i} 0, {i + 1} 0, {i + 1} 1, {i} 1, {i} 0))",
         "properties": {"subtype": "minor-damage", "uid": f"u{i}"}}
        for i in range(850)
    ]
    assert len(parse_label_file(label_doc(features=features))) == 850


def test_class_to_level_mapping():
    assert class_to_level(DamageClass.NO_DAMAGE) == 1
    assert class_to_level(DamageClass.MINOR_DAMAGE) == 2
    assert class_to_level(DamageClass.MAJOR_DAMAGE) == 3
    assert class_to_level(DamageClass.DESTROYED) == 5
    with pytest.raises(UnclassifiedNotMappable):
        class_to_level(DamageClass.UNCLASSIFIED)
    # level 4 is reserved: no class maps to it
    levels = {class_to_level(c) for c in DamageClass if c != DamageClass.UNCLASSIFIED}
    assert 4 not in levels


def test_filter_training():
    buildings = [
        make_building("a", DamageClass.NO_DAMAGE),
        make_building("b", DamageClass.UNCLASSIFIED),
        make_building("c", DamageClass.DESTROYED),
    ]
    kept = filter_training(buildings)
    assert [b.building_id for b in kept] == ["a", "c"]

    assert filter_training([make_building("x", DamageClass.UNCLASSIFIED)]) == []


def test_filter_training_counting_oracle():
    rng = random.Random(5)
    classes = list(DamageClass)
    buildings = [make_building(f"b{i}", rng.choice(classes)) for i in range(1000)]
    kept = filter_training(buildings)
    expected = sum(1 for b in buildings if b.damage != DamageClass.UNCLASSIFIED)
    assert len(kept) == expected
    assert all(b.damage != DamageClass.UNCLASSIFIED for b in kept)


def test_build_catalog_groups_by_type(tmp_path):
    write_event(tmp_path, "nepal-flooding-2017", "flood", seed=1)
    write_event(tmp_path, "hurricane-florence-2018", "hurricane", seed=2)
    catalog = build_catalog(tmp_path)
    assert sorted(catalog.by_type) == ["flood", "hurricane"]
    assert list(catalog.by_type["flood"]) == ["nepal-flooding-2017"]
    assert catalog.building_count == 50
    assert catalog.building_count == sum(ev.building_count for ev in catalog.events())


def test_build_catalog_empty(tmp_path):
    with pytest.raises(EmptyCatalog):
        build_catalog(tmp_path)


def test_build_catalog_mixed_types_rejected(tmp_path):
    write_event(tmp_path, "confused", "flood", seed=3)
    labels_dir = tmp_path / "events" / "confused" / "labels"
    doc = json.loads(label_doc(event="confused", dtype="fire", scene="other"))
    (labels_dir / "other.json").write_text(json.dumps(doc))
    with pytest.raises(MixedDisasterTypesInEvent):
        build_catalog(tmp_path)


def test_split_deterministic_and_stratified(tmp_path):
    write_event(tmp_path, "flood-ev", "flood", buildings_per_scene=50, seed=4)
    write_event(tmp_path, "fire-ev", "fire", buildings_per_scene=50, seed=5)
    catalog = build_catalog(tmp_path)

    train1, val1 = split(catalog, 0.8, seed=7)
    train2, val2 = split(catalog, 0.8, seed=7)
    key = lambda bs: [(b.scene_id, b.building_id) for b in bs]
    assert key(train1) == key(train2) and key(val1) == key(val2)

    # 40/10 within each type
    for dtype in ("flood", "fire"):
        assert sum(1 for b in train1 if b.disaster_type == dtype) == 40
        assert sum(1 for b in val1 if b.disaster_type == dtype) == 10

    # disjoint and complete
    assert set(key(train1)).isdisjoint(key(val1))
    assert len(train1) + len(val1) == 100

    train3, _ = split(catalog, 0.8, seed=8)
    assert key(train3) != key(train1)


def test_split_insufficient_stratum(tmp_path):
    write_event(tmp_path, "only-one", "tsunami", buildings_per_scene=1, seed=6)
    catalog = build_catalog(tmp_path)
    with pytest.raises(InsufficientData):
        split(catalog, 0.5, seed=0)


def test_disaster_type_vocabulary():
    assert len(DISASTER_TYPES) == 7
    with pytest.raises(UnknownDisasterType):
        make_building("z", DamageClass.NO_DAMAGE, dtype="blizzard")
