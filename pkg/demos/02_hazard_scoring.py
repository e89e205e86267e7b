"""Hazard scoring: impact attributes -> per-attribute levels -> overall level.

Shows the stock threshold table, boundary behavior (strict '>'), the
mean-of-levels aggregation, and a row override.
"""

from predism import HazardAttributes, attribute_levels, load_thresholds, overall_level, score_attribute

table = load_thresholds()

print("== threshold table (levels 5..1) ==")
for name, row in table.as_dict().items():
    print(f"  {name:18s} {row}")

print("\n== single attributes ==")
for kind, value in [("fatality", 15000), ("fatality", 10000), ("fatality", 10000.1),
                    ("direct_damage", 0.5), ("water_disruption", 3), ("water_disruption", 3.1)]:
    print(f"  {kind}={value} -> level {score_attribute(kind, value, table)}")

print("\n== a composite scenario ==")
scenario = HazardAttributes(fatality=150, injury=2500, land_impaired=12,
                            water_disruption=9, energy_disruption=16)
print(f"  per-attribute: {attribute_levels(scenario, table)}")
print(f"  overall (mean, rounded half-up): {overall_level(scenario, table)}")

print("\n== sparse input: unknown attributes are simply absent ==")
sparse = HazardAttributes(fatality=15000)
print(f"  fatality only -> overall {overall_level(sparse, table)}")

print("\n== overriding a row ==")
strict = load_thresholds({"energy_disruption": [60, 30, 14, 7, 2]})
for days in (8, 16, 40):
    print(f"  energy_disruption={days}d: stock level {score_attribute('energy_disruption', days, table)}, "
          f"strict level {score_attribute('energy_disruption', days, strict)}")
