"""Pipeline configuration: one text file, fully local paths.

The offline deployment constraint means everything the service needs
(models, school registry, data folders) must resolve to local paths at
startup; there is no remote anything to configure.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .. import textio
from ..errors import ConfigError

_KIND = "pipeline_config"


@dataclass
class PipelineConfig:
    data_root: str = "data"
    model_root: str = "models"
    school_registry: str = "schools.txt"
    case_store: str = "cases.jsonl"
    detector: str = "whole-image"
    backbone: str = "fake-projection"
    backbone_weights: Optional[str] = None
    uniform_threshold: float = 0.5
    min_width: int = 64
    min_height: int = 64
    min_bytes: int = 5120
    search_epsilon: float = 1e-6
    search_top_n: int = 10
    bind_host: str = "127.0.0.1"
    bind_port: int = 8234
    seed: int = 1234
    max_image_bytes: int = 10 * 1024 * 1024
    max_image_dim: int = 4000
    fallback_whole_image: bool = True
    # Model selection: newest registered per kind unless pinned here.
    pin_uniform_version: Optional[str] = None
    pin_attribute_version: Optional[str] = None

    def __post_init__(self):
        if not 0.0 <= self.uniform_threshold <= 1.0:
            raise ConfigError("uniform_threshold must lie in [0, 1]")
        if not 0.0 < self.search_epsilon < 1.0:
            raise ConfigError("search_epsilon must lie in (0, 1)")
        if self.search_top_n < 1:
            raise ConfigError("search_top_n must be >= 1")
        if self.max_image_bytes < 1 or self.max_image_dim < 1:
            raise ConfigError("oversize ceilings must be positive")

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        text = Path(path).read_text()
        body = textio.split_document(text, _KIND)
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for ln in body:
            key, sep, value = ln.partition(": ")
            if not sep:
                raise ConfigError(f"bad config line {ln!r}")
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            ftype = known[key].type
            if ftype in ("int",):
                kwargs[key] = int(value)
            elif ftype in ("float",):
                kwargs[key] = float(value)
            elif ftype in ("bool",):
                kwargs[key] = value == "true"
            elif key in ("backbone_weights", "pin_uniform_version", "pin_attribute_version"):
                kwargs[key] = None if value == "-" else value
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def to_text(self) -> str:
        lines = [textio.header(_KIND)]
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                value = "-"
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name}: {value}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())
