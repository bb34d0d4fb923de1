"""Declarative run configuration (YAML file with nested tables)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigError
from .prelabel import ClassMap
from .sampler import SamplerConfig

BACKENDS = ("oracle", "vfm")


@dataclass(frozen=True)
class NoiseConfig:
    """Prompt corruption sweep for the robustness ablation."""

    flip_p: tuple[float, ...] = (0.0, 0.1, 0.3)
    jitter_radius: int = 0
    seeds: int = 20

    def __post_init__(self):
        if any(not 0.0 <= p <= 1.0 for p in self.flip_p):
            raise ConfigError("noise.flip_p values must lie in [0, 1]")
        if self.jitter_radius < 0:
            raise ConfigError("noise.jitter_radius must be >= 0")
        if self.seeds < 1:
            raise ConfigError("noise.seeds must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    image_dir: str
    glc_path: str
    output_dir: str
    gt_dir: Optional[str] = None
    backend: str = "oracle"
    vfm_config_path: Optional[str] = None
    seed: int = 0
    coverage_threshold: float = 0.5
    workers: int = 1
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    class_map: ClassMap = field(default_factory=ClassMap)
    noise: Optional[NoiseConfig] = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.backend == "vfm" and not self.vfm_config_path:
            raise ConfigError("backend 'vfm' requires vfm.config_path")
        if not 0.0 <= self.coverage_threshold <= 1.0:
            raise ConfigError("coverage_threshold must lie in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def validate_paths(self) -> None:
        if not Path(self.image_dir).is_dir():
            raise ConfigError(f"image_dir does not exist: {self.image_dir}")
        if not Path(self.glc_path).is_file():
            raise ConfigError(f"glc_path does not exist: {self.glc_path}")
        if self.gt_dir is not None and not Path(self.gt_dir).is_dir():
            raise ConfigError(f"gt_dir does not exist: {self.gt_dir}")
        if self.vfm_config_path and not Path(self.vfm_config_path).is_file():
            raise ConfigError(f"vfm config does not exist: {self.vfm_config_path}")


def _take(table: dict, key: str, expected: type, default):
    value = table.get(key, default)
    if value is None:
        return None
    if expected is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, expected):
        raise ConfigError(f"config key {key!r} must be {expected.__name__}")
    return value


def load_config(path, overrides: Optional[dict] = None) -> RunConfig:
    """Parse a YAML run configuration; overrides win over file values."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})

    base = path.parent

    def respath(p):
        return str((base / p).resolve()) if p and not Path(p).is_absolute() else p

    for required in ("image_dir", "glc_path", "output_dir"):
        if required not in raw:
            raise ConfigError(f"config is missing required key {required!r}")

    sampler_tbl = raw.get("sampler", {}) or {}
    try:
        sampler = SamplerConfig(
            n_pos=_take(sampler_tbl, "n_pos", int, 30),
            n_neg=_take(sampler_tbl, "n_neg", int, 30),
            n_batches=_take(sampler_tbl, "n_batches", int, 3),
            seed=_take(raw, "seed", int, 0),
            edge_margin=_take(sampler_tbl, "edge_margin", int, 0),
            min_class_pixels=_take(sampler_tbl, "min_class_pixels", int, 1),
            absent_class_policy=_take(sampler_tbl, "absent_class_policy", str,
                                      "skip_class"),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e

    cm_tbl = raw.get("class_map", {}) or {}
    codes = cm_tbl.get("cropland_codes", [40])
    if not isinstance(codes, (list, tuple)) or not codes:
        raise ConfigError("class_map.cropland_codes must be a non-empty list")
    class_map = ClassMap(frozenset(int(c) for c in codes))

    noise = None
    if "noise" in raw and raw["noise"]:
        tbl = raw["noise"]
        flip = tbl.get("flip_p", [0.0, 0.1, 0.3])
        if not isinstance(flip, (list, tuple)):
            raise ConfigError("noise.flip_p must be a list")
        noise = NoiseConfig(flip_p=tuple(float(p) for p in flip),
                            jitter_radius=_take(tbl, "jitter_radius", int, 0),
                            seeds=_take(tbl, "seeds", int, 20))

    vfm_tbl = raw.get("vfm", {}) or {}
    return RunConfig(
        image_dir=respath(_take(raw, "image_dir", str, None)),
        glc_path=respath(_take(raw, "glc_path", str, None)),
        output_dir=respath(_take(raw, "output_dir", str, None)),
        gt_dir=respath(_take(raw, "gt_dir", str, None)),
        backend=_take(raw, "backend", str, "oracle"),
        vfm_config_path=respath(_take(vfm_tbl, "config_path", str, None)),
        seed=_take(raw, "seed", int, 0),
        coverage_threshold=_take(raw, "coverage_threshold", float, 0.5),
        workers=_take(raw, "workers", int, 1),
        sampler=sampler,
        class_map=class_map,
        noise=noise,
    )
