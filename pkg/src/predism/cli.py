"""Command line interface.

    predism ingest       --data events-root
    predism hazard-score --fatality 15000 [...]
    predism train        --data events-root --loss ordinal-ce --seed 7 --out dir
    predism predict      --scene s.png --labels s.json --type flood --level 4 --out dir
    predism sweep        --scene s.png --labels s.json --type flood --levels 3,4,5 --out dir
    predism render       --map map.json --scene s.png --labels s.json --out render.png
    predism evaluate     --map map.json --labels s.json
    predism serve        [--listen host:port]

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import AppConfig, build_model
from .damagemap import DamageMap, evaluate, predict_scene, render_png, sweep, to_geojson
from .dataset import build_catalog, parse_label_file, split
from .errors import PredismError
from .hazard import ATTRIBUTE_NAMES, HazardAttributes, attribute_levels, load_thresholds, overall_level
from .heads import neutral_ordinal_head
from .sceneio import load_scene
from .training import TrainConfig, accuracy, assemble_training_set, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_attr_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("hazard attributes")
    for name in ATTRIBUTE_NAMES:
        group.add_argument(f"--{name.replace('_', '-')}", type=float, default=None,
                           dest=name, metavar="V")


def _attrs_from_args(args) -> HazardAttributes | None:
    values = {name: getattr(args, name) for name in ATTRIBUTE_NAMES
              if getattr(args, name, None) is not None}
    return HazardAttributes.from_mapping(values) if values else None


def _load_config(args) -> AppConfig:
    config = AppConfig.load(getattr(args, "config", None))
    if getattr(args, "chip_size", None):
        config.chip_size = args.chip_size
    if getattr(args, "tau", None):
        config.tau = args.tau
    config.__post_init__()
    return config


def _load_scene_and_footprints(args):
    scene = load_scene(args.scene)
    buildings = parse_label_file(Path(args.labels).read_text())
    return scene, buildings, [b.footprint for b in buildings]


def cmd_ingest(args) -> int:
    catalog = build_catalog(args.data)
    print(json.dumps({
        "events": catalog.summary(),
        "total_buildings": catalog.building_count,
    }, indent=2))
    return EXIT_OK


def cmd_hazard_score(args) -> int:
    attrs = _attrs_from_args(args)
    if attrs is None:
        print("hazard-score: supply at least one attribute flag", file=sys.stderr)
        return EXIT_USAGE
    table = load_thresholds(json.loads(Path(args.thresholds).read_text())
                            if args.thresholds else None)
    overall = overall_level(attrs, table)
    if args.json:
        print(json.dumps({
            "per_attribute_levels": attribute_levels(attrs, table),
            "overall": overall,
        }, indent=2))
    else:
        print(overall)
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_config(args)
    catalog = build_catalog(args.data)
    thresholds = load_thresholds(config.threshold_overrides)

    train_buildings, val_buildings = split(catalog, args.ratio, args.seed)
    val_ids = {(b.scene_id, b.building_id) for b in val_buildings}

    full = assemble_training_set(catalog, thresholds, config.chip_size)
    train_idx = [i for i, chip in enumerate(full.chips)
                 if (chip.scene_id, chip.building_id) not in val_ids]
    train_set = set(train_idx)
    val_idx = [i for i in range(len(full.chips)) if i not in train_set]

    X, y = full.design_matrix()
    cfg = TrainConfig(loss=args.loss, seed=args.seed, epochs=args.epochs,
                      batch_size=args.batch_size)
    head, history = train(neutral_ordinal_head(), (X[train_idx], y[train_idx]), cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "head.json").write_text(json.dumps(head.to_dict(), indent=2))
    (out / "loss_history.json").write_text(json.dumps(history))
    metrics = {
        "train_accuracy": accuracy(head, X[train_idx], y[train_idx]),
        "val_accuracy": accuracy(head, X[val_idx], y[val_idx]) if val_idx else None,
        "n_train": len(train_idx),
        "n_val": len(val_idx),
        "loss": args.loss,
        "seed": args.seed,
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2))
    print(json.dumps(metrics, indent=2))
    return EXIT_OK


def _hazard_from_args(args) -> HazardAttributes | int:
    attrs = _attrs_from_args(args)
    if args.level is not None and attrs is not None:
        print("give either --level or attribute flags, not both", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    if args.level is not None:
        return args.level
    if attrs is not None:
        return attrs
    print("give --level or at least one hazard attribute flag", file=sys.stderr)
    raise SystemExit(EXIT_USAGE)


def cmd_predict(args) -> int:
    config = _load_config(args)
    model = build_model(config, args.model)
    scene, _, footprints = _load_scene_and_footprints(args)
    damage_map = predict_scene(scene, footprints, args.type, _hazard_from_args(args), model)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "map.json").write_text(json.dumps(damage_map.to_dict(), indent=2))
    if scene.geo_bounds is not None:
        geojson = to_geojson(damage_map, footprints, scene.geo_bounds,
                             (scene.width, scene.height))
        (out / "map.geojson").write_text(geojson)
    (out / "render.png").write_bytes(render_png(damage_map, scene, footprints, config.palette))
    counts = {}
    for entry in damage_map.entries:
        counts[str(entry.level_label())] = counts.get(str(entry.level_label()), 0) + 1
    print(json.dumps({"hazard_level": damage_map.hazard_level, "levels": counts}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load_config(args)
    model = build_model(config, args.model)
    scene, _, footprints = _load_scene_and_footprints(args)
    try:
        levels = [int(v) for v in args.levels.split(",") if v.strip()]
    except ValueError:
        print(f"bad --levels value {args.levels!r}", file=sys.stderr)
        return EXIT_USAGE

    maps = sweep(scene, footprints, args.type, levels, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"scene_id": scene.scene_id, "disaster_type": args.type,
                "maps": [], "renders": []}
    for damage_map in maps:
        geo_name = f"level{damage_map.hazard_level}.geojson"
        png_name = f"level{damage_map.hazard_level}.png"
        geojson = to_geojson(damage_map, footprints, scene.geo_bounds,
                             (scene.width, scene.height))
        (out / geo_name).write_text(geojson)
        (out / png_name).write_bytes(render_png(damage_map, scene, footprints, config.palette))
        manifest["maps"].append({"level": damage_map.hazard_level, "geojson": geo_name})
        manifest["renders"].append(png_name)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(json.dumps(manifest, indent=2))
    return EXIT_OK


def cmd_render(args) -> int:
    config = _load_config(args)
    damage_map = DamageMap.from_dict(json.loads(Path(args.map).read_text()))
    scene, _, footprints = _load_scene_and_footprints(args)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_bytes(render_png(damage_map, scene, footprints, config.palette))
    print(args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    damage_map = DamageMap.from_dict(json.loads(Path(args.map).read_text()))
    gold = parse_label_file(Path(args.labels).read_text())
    report = evaluate(damage_map, gold)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve

    config = _load_config(args)
    if args.listen:
        config.listen = args.listen
    service = serve(config, model_override=args.model, block=False)
    print(f"listening on {config.listen.rsplit(':', 1)[0]}:{service.port}", flush=True)
    try:
        service.join()
    except KeyboardInterrupt:
        service.stop()
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="predism",
                     description="Per-building damage forecasting for hypothetical hazards")
    parser.add_argument("--config", help="path to JSON config (or $PREDISM_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[], help="summarize an events directory")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("hazard-score", help="overall hazard level from impact attributes")
    _add_attr_flags(p)
    p.add_argument("--thresholds", help="JSON file overriding threshold rows")
    p.add_argument("--json", action="store_true", help="print the full breakdown")
    p.set_defaults(func=cmd_hazard_score)

    p = sub.add_parser("train", help="fit the reference head on an event catalog")
    p.add_argument("--data", required=True)
    p.add_argument("--loss", choices=["ce", "ordinal-ce"], default="ce")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--chip-size", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    for name, fn, with_levels in (("predict", cmd_predict, False), ("sweep", cmd_sweep, True)):
        p = sub.add_parser(name, help=f"{name} damage for a scene")
        p.add_argument("--scene", required=True)
        p.add_argument("--labels", required=True)
        p.add_argument("--type", required=True)
        if with_levels:
            p.add_argument("--levels", required=True, help="comma-separated hazard levels")
        else:
            p.add_argument("--level", type=int)
            _add_attr_flags(p)
        p.add_argument("--model", help="trained head JSON")
        p.add_argument("--chip-size", type=int)
        p.add_argument("--tau", type=float)
        p.add_argument("--out", required=True)
        p.set_defaults(func=fn)

    p = sub.add_parser("render", help="render a saved damage map to PNG")
    p.add_argument("--map", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("evaluate", help="score a damage map against gold labels")
    p.add_argument("--map", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--listen", help="host:port (default from config)")
    p.add_argument("--model", help="trained head JSON")
    p.add_argument("--chip-size", type=int)
    p.add_argument("--tau", type=float)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PredismError as e:
        print(f"predism: error [{e.code}]: {e}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as e:
        print(f"predism: error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
