"""Pipeline configuration: layered JSON defaults and backend construction.

Precedence: built-in defaults, then the config file, then command-line
overrides. The resolved configuration (all defaults materialized) is echoed
into every run manifest so a run is replayable from its manifest alone.
"""

from __future__ import annotations

import copy
import json
import warnings
from dataclasses import dataclass

from .backend import MockBackend, ModelBackend
from .compose import ComposeConfig
from .errors import ConfigError, SchemaWarning
from .injection import InjectionConfig
from .scheduler import SchedulerConfig

BUILTIN_DEFAULTS: dict = {
    "seed": 0,
    "backend": {
        "name": "mock",
        "token_count": 64,
        "token_dim": 16,
        "latent_grid": [8, 8],
        "latent_channels": 4,
        "attention_layers": 3,
        "attention_fixture": None,
        "sketch_grid": [2, 2],
    },
    "injection": {
        "enabled": True,
        "beta_fg": 0.3,
        "beta_bg": 0.2,
        "n_fg": 16,
        "n_bg": 8,
        "overlap": "literal",
        "scoring_sigma": None,
    },
    "scheduler": {
        "n_steps": 28,
        "shape": "shifted",
        "shift": 3.0,
        "strength": 0.7,
    },
    "compose": {
        "svg_paste_back": True,
        "alpha_threshold": 0.5,
        "mask_resolution": "pixel",
        "image_update": "full",
        "bbox_dilation_px": 8,
    },
    "embedder": "reference",
}


def _merge(base: dict, overlay: dict, path: str = "config") -> dict:
    out = copy.deepcopy(base)
    for key, value in overlay.items():
        if key not in base:
            warnings.warn(f"{path}.{key}: unknown field ignored", SchemaWarning, stacklevel=3)
            continue
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, f"{path}.{key}")
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class PipelineConfig:
    resolved: dict

    @property
    def seed(self) -> int:
        return int(self.resolved["seed"])

    @property
    def embedder_name(self) -> str:
        return self.resolved["embedder"]

    def compose_config(self) -> ComposeConfig:
        inj = self.resolved["injection"]
        sch = self.resolved["scheduler"]
        cmp = self.resolved["compose"]
        return ComposeConfig(
            injection=InjectionConfig(
                enabled=bool(inj["enabled"]),
                beta_fg=float(inj["beta_fg"]),
                beta_bg=float(inj["beta_bg"]),
                n_fg=int(inj["n_fg"]),
                n_bg=int(inj["n_bg"]),
                overlap=inj["overlap"],
                scoring_sigma=None if inj["scoring_sigma"] is None else float(inj["scoring_sigma"]),
            ),
            scheduler=SchedulerConfig(
                n_steps=int(sch["n_steps"]),
                shape=sch["shape"],
                shift=float(sch["shift"]),
                strength=float(sch["strength"]),
            ),
            seed=self.seed,
            svg_paste_back=bool(cmp["svg_paste_back"]),
            alpha_threshold=float(cmp["alpha_threshold"]),
            mask_resolution=cmp["mask_resolution"],
            image_update=cmp["image_update"],
            bbox_dilation_px=int(cmp["bbox_dilation_px"]),
        )

    def build_backend(self) -> ModelBackend:
        spec = self.resolved["backend"]
        if spec["name"] != "mock":
            raise ConfigError(
                f"unknown backend {spec['name']!r}; only the deterministic mock ships "
                "(real stacks plug in through the ModelBackend adapter contract)"
            )
        return MockBackend(
            seed=self.seed,
            token_count=int(spec["token_count"]),
            token_dim=int(spec["token_dim"]),
            latent_grid=tuple(spec["latent_grid"]),
            latent_channels=int(spec["latent_channels"]),
            attention_layers=int(spec["attention_layers"]),
            attention_fixture=spec["attention_fixture"],
            sketch_grid=tuple(spec["sketch_grid"]),
        )


def load_pipeline_config(path: str | None = None, overrides: dict | None = None) -> PipelineConfig:
    resolved = copy.deepcopy(BUILTIN_DEFAULTS)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"unreadable config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid config JSON in {path}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        resolved = _merge(resolved, file_cfg)
    if overrides:
        resolved = _merge(resolved, overrides)
    return PipelineConfig(resolved=resolved)
