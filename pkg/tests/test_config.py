import json

import pytest

from predism.config import AppConfig, BackendDecl, build_model, build_registry
from predism.errors import BadConfig, NonMonotoneRow


def test_defaults():
    config = AppConfig()
    assert config.chip_size == 64
    assert config.tau == 0.35
    assert len(config.backends) == 7
    assert all(d.kind == "reference-ordinal" for d in config.backends.values())


def test_validation():
    with pytest.raises(BadConfig):
        AppConfig(tau=1.5)
    with pytest.raises(BadConfig):
        AppConfig(chip_size=4)
    with pytest.raises(BadConfig):
        AppConfig.from_dict({"backends": {"blizzard": {"kind": "reference-ordinal"}}})
    with pytest.raises(BadConfig):
        AppConfig.from_dict({"unknown_key": 1})
    with pytest.raises(BadConfig):
        BackendDecl(kind="external")  # needs command or url
    with pytest.raises(BadConfig):
        AppConfig(palette={"9": "#FFFFFF"})
    with pytest.raises(NonMonotoneRow):
        AppConfig(threshold_overrides={"fatality": [1, 2, 3, 4, 5]})


def test_load_from_file_and_env(tmp_path, monkeypatch):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"tau": 0.5, "chip_size": 32}))
    config = AppConfig.load(path)
    assert config.tau == 0.5 and config.chip_size == 32

    monkeypatch.setenv("PREDISM_CONFIG", str(path))
    assert AppConfig.load().tau == 0.5
    # explicit path wins over the env var
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"tau": 0.7}))
    assert AppConfig.load(other).tau == 0.7

    monkeypatch.delenv("PREDISM_CONFIG")
    assert AppConfig.load().tau == 0.35


def test_load_missing_or_invalid(tmp_path):
    with pytest.raises(BadConfig):
        AppConfig.load(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{invalid")
    with pytest.raises(BadConfig):
        AppConfig.load(bad)


def test_build_model_honors_declarations():
    config = AppConfig.from_dict({
        "backends": {
            "flood": {"kind": "reference-ordinal"},
            "fire": {"kind": "reference-softmax"},
        },
        "tau": 0.4,
        "chip_size": 32,
    })
    model = build_model(config)
    assert model.tau == 0.4
    assert model.chip_size == 32
    assert model.registry.types() == ["fire", "flood"]
    assert model.registry.get("fire").kind == "reference-softmax"


def test_registry_with_co_occurrence():
    co = [[0.0] * 7 for _ in range(7)]
    co[2][2] = 1.0
    config = AppConfig.from_dict({"co_occurrence": co})
    registry = build_registry(config)
    assert registry.co_occurrence is not None


def test_public_dict_shape():
    doc = AppConfig().public_dict()
    assert set(doc) == {"chip_size", "tau", "palette", "palette_id",
                        "disaster_types", "thresholds", "backends"}
    assert doc["palette"]["unclassified"] == "#95A5A6"
