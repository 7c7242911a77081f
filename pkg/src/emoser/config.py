"""Application configuration: a strict JSON file mapped onto dataclasses.

Unknown keys are rejected at every level so a typo in one of the many
tunable names fails loudly instead of silently using a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .features import PipelineConfig
from .train_eval import TrainConfig


class ConfigParseError(Exception):
    pass


@dataclass(frozen=True)
class SplitConfig:
    ratio: float = 0.75
    seed: int = 0
    strategy: str = "stratified"

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise ValueError(f"ratio must be in (0, 1), got {self.ratio}")
        if self.strategy not in ("stratified", "speaker"):
            raise ValueError(f"strategy must be stratified or speaker, got {self.strategy!r}")


@dataclass(frozen=True)
class PathsConfig:
    corpus_root: str = ""
    cache: str = "features.bin"
    checkpoint: str = "model.ckpt"
    reports_dir: str = "reports"


@dataclass(frozen=True)
class AppConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)


def _build(cls, raw: dict, context: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigParseError(f"unknown keys in {context}: {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(f"bad {context} config: {exc}") from exc


def parse_app_config(text: str) -> AppConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigParseError("config root must be a JSON object")
    sections = {"pipeline": PipelineConfig, "train": TrainConfig,
                "split": SplitConfig, "paths": PathsConfig}
    unknown = set(raw) - set(sections)
    if unknown:
        raise ConfigParseError(f"unknown top-level keys: {sorted(unknown)}")
    built = {}
    for name, cls in sections.items():
        section = raw.get(name, {})
        if not isinstance(section, dict):
            raise ConfigParseError(f"{name} section must be a JSON object")
        built[name] = _build(cls, section, name)
    return AppConfig(**built)


def load_app_config(path: str | Path | None) -> AppConfig:
    if path is None:
        return AppConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigParseError(f"config file not found: {p}")
    return parse_app_config(p.read_text())
