"""Application configuration: one JSON document, flags take precedence.

The config names a backend per disaster type (reference heads by default,
external subprocess/HTTP models otherwise), decision parameters, and
service paths. `PREDISM_CONFIG` overrides the default config path.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .backbones import (
    DEFAULT_TIMEOUT_MS,
    BackboneRegistry,
    HttpBackbone,
    ReferenceOrdinalBackbone,
    ReferenceSoftmaxBackbone,
    SubprocessBackbone,
)
from .damagemap import DEFAULT_PALETTE_ID, PALETTE, DamageModel
from .dataset import DISASTER_TYPES
from .errors import BadConfig
from .hazard import load_thresholds
from .heads import (
    DEFAULT_TAU,
    OrdinalHead,
    SoftmaxHead,
    default_ordinal_head,
    default_softmax_head,
    load_head,
)
from .rastergeom import DEFAULT_CHIP_SIZE

ENV_CONFIG = "PREDISM_CONFIG"
BACKEND_KINDS = ("reference-ordinal", "reference-softmax", "external")


@dataclass
class BackendDecl:
    kind: str = "reference-ordinal"
    command: Optional[list[str]] = None  # external: subprocess argv
    url: Optional[str] = None            # external: HTTP endpoint
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    head: Optional[str] = None           # reference: trained head JSON path

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise BadConfig(f"unknown backend kind {self.kind!r}")
        if self.kind == "external" and not (self.command or self.url):
            raise BadConfig("external backend needs 'command' or 'url'")


@dataclass
class AppConfig:
    chip_size: int = DEFAULT_CHIP_SIZE
    tau: float = DEFAULT_TAU
    threshold_overrides: dict = field(default_factory=dict)
    palette: dict[str, str] = field(default_factory=lambda: dict(PALETTE))
    palette_id: str = DEFAULT_PALETTE_ID
    backends: dict[str, BackendDecl] = field(
        default_factory=lambda: {t: BackendDecl() for t in DISASTER_TYPES}
    )
    co_occurrence: Optional[list[list[float]]] = None
    data_root: Optional[str] = None
    listen: str = "127.0.0.1:8351"
    artifacts_dir: str = "artifacts"

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise BadConfig(f"tau must be in (0, 1), got {self.tau}")
        if self.chip_size < 8:
            raise BadConfig(f"chip_size must be >= 8, got {self.chip_size}")
        for disaster_type in self.backends:
            if disaster_type not in DISASTER_TYPES:
                raise BadConfig(f"backend declared for unknown type {disaster_type!r}")
        for key in self.palette:
            if key not in PALETTE:
                raise BadConfig(f"palette key must be a level 1-5 or 'unclassified', got {key!r}")
        self.palette = {**PALETTE, **self.palette}  # partial overrides keep defaults
        load_thresholds(self.threshold_overrides)  # validates rows

    @classmethod
    def from_dict(cls, data: dict) -> "AppConfig":
        data = dict(data)
        backends_raw = data.pop("backends", None)
        kwargs = {}
        for name in ("chip_size", "tau", "threshold_overrides", "palette", "palette_id",
                     "co_occurrence", "data_root", "listen", "artifacts_dir"):
            if name in data:
                kwargs[name] = data.pop(name)
        if data:
            raise BadConfig(f"unknown config key(s): {sorted(data)}")
        config = cls(**kwargs)
        if backends_raw is not None:
            backends = {}
            for disaster_type, decl in backends_raw.items():
                if isinstance(decl, str):
                    decl = {"kind": decl}
                try:
                    backends[disaster_type] = BackendDecl(**decl)
                except TypeError as e:
                    raise BadConfig(f"backend {disaster_type!r}: {e}") from None
            config.backends = backends
            config.__post_init__()
        return config

    @classmethod
    def load(cls, path: str | Path | None = None) -> "AppConfig":
        """Read config from `path`, else $PREDISM_CONFIG, else defaults."""
        if path is None:
            path = os.environ.get(ENV_CONFIG)
        if path is None:
            return cls()
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise BadConfig(f"config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise BadConfig(f"config file {path} is not valid JSON: {e}") from None
        return cls.from_dict(data)

    def public_dict(self) -> dict:
        """The config view served over GET /config (palette is the UI's
        single source of level colors)."""
        return {
            "chip_size": self.chip_size,
            "tau": self.tau,
            "palette": dict(self.palette),
            "palette_id": self.palette_id,
            "disaster_types": list(DISASTER_TYPES),
            "thresholds": load_thresholds(self.threshold_overrides).as_dict(),
            "backends": {t: d.kind for t, d in sorted(self.backends.items())},
        }


def _build_backbone(disaster_type: str, decl: BackendDecl, model_override: str | None):
    if decl.kind == "external":
        if decl.command:
            return SubprocessBackbone(decl.command, disaster_type, decl.timeout_ms)
        return HttpBackbone(decl.url, disaster_type, decl.timeout_ms)

    head_path = model_override or decl.head
    head = load_head(json.loads(Path(head_path).read_text())) if head_path else None
    if decl.kind == "reference-ordinal":
        if head is None:
            head = default_ordinal_head()
        elif not isinstance(head, OrdinalHead):
            raise BadConfig(f"{disaster_type}: head file is not an ordinal head")
        return ReferenceOrdinalBackbone(head, disaster_type)
    if head is None:
        head = default_softmax_head()
    elif not isinstance(head, SoftmaxHead):
        raise BadConfig(f"{disaster_type}: head file is not a softmax head")
    return ReferenceSoftmaxBackbone(head, disaster_type)


def build_registry(config: AppConfig, model_override: str | None = None) -> BackboneRegistry:
    backbones = {
        disaster_type: _build_backbone(disaster_type, decl, model_override)
        for disaster_type, decl in config.backends.items()
    }
    co = np.array(config.co_occurrence, dtype=np.float64) if config.co_occurrence else None
    return BackboneRegistry(backbones, co_occurrence=co)


def build_model(config: AppConfig, model_override: str | None = None) -> DamageModel:
    return DamageModel(
        registry=build_registry(config, model_override),
        tau=config.tau,
        chip_size=config.chip_size,
        thresholds=load_thresholds(config.threshold_overrides),
    )
