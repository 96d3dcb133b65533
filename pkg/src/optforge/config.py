"""Shared toolchain configuration.

Values resolve with precedence flag > environment > config file > default.
The config file is YAML (plain JSON parses too); its path comes from --config
or the OPTFORGE_CONFIG environment variable.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .canonicalize import FormatterConfig
from .generator import GeneratorBackend

__all__ = ["ToolConfig", "load_config", "ENV_CONFIG", "ENV_OVERRIDES"]

ENV_CONFIG = "OPTFORGE_CONFIG"

# env var -> (ToolConfig field, parser)
ENV_OVERRIDES = {
    "OPTFORGE_SIMILARITY_THRESHOLD": ("similarity_threshold", float),
    "OPTFORGE_PI_THRESHOLD": ("pi_threshold", float),
    "OPTFORGE_PI_CAP": ("pi_cap", float),
    "OPTFORGE_SAMPLES": ("samples_per_program", int),
    "OPTFORGE_MAX_CHANGED_LINES": ("max_changed_lines", int),
    "OPTFORGE_MAX_CHANGED_FRACTION": ("max_changed_fraction", float),
    "OPTFORGE_SEED": ("seed", int),
    "OPTFORGE_CONCURRENCY": ("concurrency", int),
}


@dataclass
class ToolConfig:
    # Defaults are the reference constants: 0.8 similarity, 20 lines, 20%,
    # 10 candidates per program, PI >= 1.2.
    similarity_threshold: float = 0.8
    max_changed_lines: int = 20
    max_changed_fraction: float = 0.20
    samples_per_program: int = 10
    pi_threshold: float = 1.2
    pi_cap: float = 100.0
    seed: int = 0
    concurrency: int = 4
    formatter: FormatterConfig = field(default_factory=FormatterConfig)
    backend: GeneratorBackend = field(default_factory=GeneratorBackend)

    def __post_init__(self) -> None:
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must be in [0, 1]")
        if not 0.0 <= self.max_changed_fraction <= 1.0:
            raise ValueError("max_changed_fraction must be in [0, 1]")
        if self.max_changed_lines < 0:
            raise ValueError("max_changed_lines must be >= 0")
        if self.pi_threshold < 1.0:
            raise ValueError("pi_threshold must be >= 1.0")
        if self.samples_per_program < 1:
            raise ValueError("samples_per_program must be >= 1")
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")


_SCALAR_FIELDS = {
    f.name: f.type for f in fields(ToolConfig) if f.name not in ("formatter", "backend")
}


def _from_mapping(data: dict) -> ToolConfig:
    kwargs = {}
    for name in _SCALAR_FIELDS:
        if name in data:
            kwargs[name] = data[name]
    if "formatter" in data:
        kwargs["formatter"] = FormatterConfig(**data["formatter"])
    if "backend" in data:
        kwargs["backend"] = GeneratorBackend(**data["backend"])
        if "samples_per_program" in data["backend"] and "samples_per_program" not in data:
            kwargs["samples_per_program"] = data["backend"]["samples_per_program"]
    return ToolConfig(**kwargs)


def load_config(path: str | Path | None = None, env: dict | None = None) -> ToolConfig:
    """Build a ToolConfig from defaults, overlaid by the config file (if any),
    overlaid by OPTFORGE_* environment variables. CLI flags are applied on
    top by the caller."""
    env = os.environ if env is None else env
    if path is None:
        path = env.get(ENV_CONFIG)
    if path:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config file {path} must hold a mapping")
        config = _from_mapping(data)
    else:
        config = ToolConfig()

    for var, (name, parser) in ENV_OVERRIDES.items():
        if var in env:
            setattr(config, name, parser(env[var]))
    config.__post_init__()  # re-validate after env overlay
    # The top-level sample count is authoritative; keep the backend in step.
    config.backend.samples_per_program = config.samples_per_program
    return config
