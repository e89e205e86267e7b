import json
import math
import random

import pytest

from predism.errors import (
    IncompleteRow,
    NegativeValue,
    NoAttributes,
    NonMonotoneRow,
    UnknownAttribute,
)
from predism.hazard import (
    ATTRIBUTE_NAMES,
    DEFAULT_THRESHOLDS,
    HazardAttributes,
    load_thresholds,
    overall_level,
    score_attribute,
)


def test_default_table_rows():
    table = load_thresholds()
    assert table.row("fatality") == (10000, 1000, 100, 10, 1)
    assert table.row("injury") == (100000, 10000, 1000, 100, 10)
    assert table.row("land_impaired") == (500, 100, 50, 10, 1)
    assert table.row("direct_damage") == (100, 10, 1, 0.1, 0.01)
    assert table.row("indirect_damage") == (100, 10, 1, 0.1, 0.01)
    assert table.row("water_disruption") == (30, 14, 7, 3, 1)
    assert table.row("energy_disruption") == (30, 14, 7, 3, 1)


@pytest.mark.parametrize("kind,value,expected", [
    ("fatality", 15000, 5),
    ("direct_damage", 0.5, 2),
    ("water_disruption", 3, 1),  # 3 is not > 3, but is > 1
    ("fatality", 0, 1),
    ("injury", 100001, 5),
    ("energy_disruption", 8, 3),
])
def test_score_attribute_examples(kind, value, expected):
    assert score_attribute(kind, value) == expected


def test_boundary_exactness_all_attributes():
    # value == threshold scores level-1 (strict '>'), the tiniest excess scores level
    table = load_thresholds()
    for kind in ATTRIBUTE_NAMES:
        row = table.row(kind)
        for level, threshold in zip((5, 4, 3, 2), row[:4]):
            assert score_attribute(kind, threshold, table) == level - 1, (kind, level)
            assert score_attribute(kind, threshold * (1 + 1e-9), table) == level, (kind, level)


def test_score_attribute_errors():
    with pytest.raises(UnknownAttribute):
        score_attribute("magnitude", 7, load_thresholds())
    with pytest.raises(NegativeValue):
        score_attribute("fatality", -1, load_thresholds())


def test_score_monotone_in_value():
    table = load_thresholds()
    rng = random.Random(11)
    for kind in ATTRIBUTE_NAMES:
        values = sorted(rng.uniform(0, 2e5) for _ in range(200))
        levels = [score_attribute(kind, v, table) for v in values]
        assert levels == sorted(levels), kind


def test_overall_level_mean_examples():
    # levels [5,4,3,2,1,1,1]: mean 17/7 ~= 2.4286 rounds half-up to 2
    attrs = HazardAttributes(
        fatality=15000,        # 5
        injury=20000,          # 4
        land_impaired=60,      # 3
        direct_damage=0.5,     # 2
        indirect_damage=0.005, # 1
        water_disruption=0.5,  # 1
        energy_disruption=0.2, # 1
    )
    assert overall_level(attrs) == 2

    assert overall_level(HazardAttributes(fatality=15000)) == 5

    all_worst = HazardAttributes(
        fatality=20000, injury=200000, land_impaired=600,
        direct_damage=150, indirect_damage=150,
        water_disruption=40, energy_disruption=40,
    )
    assert overall_level(all_worst) == 5


def test_overall_round_half_up():
    # levels [3,2]: mean 2.5 rounds up to 3
    attrs = HazardAttributes(fatality=150, water_disruption=5)
    assert score_attribute("fatality", 150) == 3
    assert score_attribute("water_disruption", 5) == 2
    assert overall_level(attrs) == 3


def test_overall_permutation_invariant_and_bounded():
    table = load_thresholds()
    rng = random.Random(23)
    for _ in range(300):
        names = rng.sample(ATTRIBUTE_NAMES, rng.randint(1, 7))
        values = {name: rng.uniform(0, 1e5) for name in names}
        base = overall_level(HazardAttributes.from_mapping(values), table)
        shuffled = list(values.items())
        rng.shuffle(shuffled)
        assert overall_level(HazardAttributes.from_mapping(dict(shuffled)), table) == base
        levels = [score_attribute(k, v, table) for k, v in values.items()]
        assert min(levels) <= base <= max(levels)


def test_attributes_validation():
    with pytest.raises(NoAttributes):
        HazardAttributes()
    with pytest.raises(NegativeValue):
        HazardAttributes(fatality=-5)
    with pytest.raises(UnknownAttribute):
        HazardAttributes.from_mapping({"richter": 8})


def test_load_thresholds_overrides():
    table = load_thresholds({"energy_disruption": [60, 30, 14, 7, 2]})
    assert table.row("energy_disruption") == (60, 30, 14, 7, 2)
    assert score_attribute("energy_disruption", 8, table) == 2
    # untouched rows keep defaults
    assert table.row("fatality") == DEFAULT_THRESHOLDS["fatality"]

    # JSON document form
    table2 = load_thresholds(json.dumps({"fatality": [5000, 500, 50, 5, 0.5]}))
    assert score_attribute("fatality", 6000, table2) == 5


def test_load_thresholds_rejects_bad_rows():
    with pytest.raises(NonMonotoneRow):
        load_thresholds({"fatality": [1, 2, 3, 4, 5]})
    with pytest.raises(IncompleteRow):
        load_thresholds({"fatality": [10, 5, 1]})
    with pytest.raises(UnknownAttribute):
        load_thresholds({"richter": [9, 8, 7, 6, 5]})
    with pytest.raises(IncompleteRow):
        load_thresholds({"fatality": [math.inf, 1000, 100, 10, 1]})
