"""Run configuration: one TOML document with per-stage tables.

Every knob a pipeline run depends on (oracle commands, cleanup counts,
thresholds, augmentation ranges, serve address) lives in a single file so
a run is reproducible from one artifact; command-line flags override
individual fields.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .metrics import DEFAULT_THRESHOLDS


@dataclass
class OracleConfig:
    command: list[str]
    max_frames_per_request: int = 64
    window: int = 4


@dataclass
class ToolConfig:
    oracles: dict[str, OracleConfig] = field(default_factory=dict)
    # extraction
    strategy: str = "vs"
    erode: int = 1
    dilate: int = 1
    stride: int = 1
    halo: int = 2
    workers: int = 1
    # evaluation
    thresholds: tuple = DEFAULT_THRESHOLDS
    eval_mode: str = "per-hand"
    crop: bool = False
    bbox_margin: float = 0.1
    mode_scoring: str = "union-of-modes"
    # dataset
    blacklist_path: Optional[Path] = None
    # augmentation
    seed: int = 0
    brightness: float = 0.2
    contrast: float = 0.2
    saturation: float = 0.2
    hue: float = 0.05
    min_scale: float = 0.7
    # serve
    host: str = "127.0.0.1"
    port: int = 8080
    store_dir: Optional[Path] = None

    def validate(self) -> None:
        if self.strategy not in ("vs", "ir"):
            raise ValueError(f"unknown completion strategy {self.strategy!r}")
        if not self.thresholds:
            raise ValueError("threshold set must be nonempty")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.blacklist_path is not None and not self.blacklist_path.exists():
            raise ValueError(f"blacklist file not found: {self.blacklist_path}")


def load_config(path: Union[str, Path]) -> ToolConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    base = path.parent

    def _path(value):
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else base / p

    config = ToolConfig()
    for kind, table in doc.get("oracles", {}).items():
        config.oracles[kind] = OracleConfig(
            command=[str(part) for part in table["command"]],
            max_frames_per_request=int(table.get("max_frames_per_request", 64)),
            window=int(table.get("window", 4)),
        )
    extract = doc.get("extract", {})
    config.strategy = str(extract.get("strategy", config.strategy))
    config.erode = int(extract.get("erode", config.erode))
    config.dilate = int(extract.get("dilate", config.dilate))
    config.stride = int(extract.get("stride", config.stride))
    config.halo = int(extract.get("halo", config.halo))
    config.workers = int(extract.get("workers", config.workers))

    ev = doc.get("eval", {})
    config.thresholds = tuple(float(t) for t in ev.get("thresholds", config.thresholds))
    config.eval_mode = str(ev.get("mode", config.eval_mode))
    config.crop = bool(ev.get("crop", config.crop))
    config.bbox_margin = float(ev.get("bbox_margin", config.bbox_margin))
    config.mode_scoring = str(ev.get("mode_scoring", config.mode_scoring))

    ds = doc.get("dataset", {})
    config.blacklist_path = _path(ds.get("blacklist"))

    aug = doc.get("augment", {})
    config.seed = int(aug.get("seed", config.seed))
    config.brightness = float(aug.get("brightness", config.brightness))
    config.contrast = float(aug.get("contrast", config.contrast))
    config.saturation = float(aug.get("saturation", config.saturation))
    config.hue = float(aug.get("hue", config.hue))
    config.min_scale = float(aug.get("min_scale", config.min_scale))

    serve = doc.get("serve", {})
    config.host = str(serve.get("host", config.host))
    config.port = int(serve.get("port", config.port))
    config.store_dir = _path(serve.get("store"))

    config.validate()
    return config
