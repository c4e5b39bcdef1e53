"""Engine configuration: defaults, JSON config files, dotted overrides.

A config is a plain nested dict validated against the default tree —
unknown sections or keys are rejected, and every nested parameter object
is constructed eagerly at load time so range violations surface
immediately rather than mid-run. Command-line `--set section.key=value`
overrides take precedence over the file, which takes precedence over the
defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .composition import CcConfig
from .diffusion import Schedule, make_schedule
from .errors import ParseError, ValidationError
from .paca import PacaConfig
from .sog import SogConfig

DEFAULTS: dict[str, Any] = {
    "schedule": {"T": 1000, "beta_start": 0.00085, "beta_end": 0.012},
    "sog": {"t_start": 800, "num_steps": 40, "guidance_scale": 7.5, "flat_color": -1.0},
    "paca": {"w_prime": 0.3, "max_attention_resolution": 32},
    "cc": {"t_start": 800, "t_min": 100, "num_steps": 40, "guidance_scale": 7.5},
    "regca": {"separator": ", ", "max_attention_resolution": None},
    "backends": {
        "denoiser": "toy",
        "inpaint_denoiser": "toy",
        "text_encoder": "toy",
        "latent_codec": "toy",
        "segmenter": "toy",
        "image_text_embedder": "toy",
    },
    "output_dir": "runs",
    "seed": 0,
}


def _merge(defaults: Mapping, override: Mapping, trail: str, problems: list[str]) -> dict:
    out = {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in defaults.items()}
    for key, value in override.items():
        path = f"{trail}{key}"
        if key not in defaults:
            problems.append(f"unknown config key: {path}")
            continue
        if isinstance(defaults[key], Mapping):
            if not isinstance(value, Mapping):
                problems.append(f"config key {path} must be a table of settings")
                continue
            out[key] = _merge(defaults[key], value, f"{path}.", problems)
        else:
            out[key] = value
    return out


def _coerce(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: Mapping[str, Any]) -> dict:
    """Apply `section.key` → value assignments onto a merged config dict."""
    problems = []
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = data
        for part in parts[:-1]:
            node = node.get(part) if isinstance(node, dict) else None
            if node is None:
                break
        leaf = parts[-1]
        if not isinstance(node, dict) or leaf not in node:
            problems.append(f"unknown config key: {dotted}")
            continue
        if isinstance(node[leaf], dict):
            problems.append(f"config key {dotted} is a section, not a value")
            continue
        node[leaf] = _coerce(value) if isinstance(value, str) else value
    if problems:
        raise ValidationError(problems)
    return data


@dataclass(frozen=True)
class EngineConfig:
    """Fully merged configuration with typed views onto each subsystem."""

    data: dict

    def make_schedule(self) -> Schedule:
        return make_schedule(**self.data["schedule"])

    def sog_config(self) -> SogConfig:
        sog = self.data["sog"]
        paca = self.data["paca"]
        return SogConfig(
            t_start=sog["t_start"],
            num_steps=sog["num_steps"],
            guidance_scale=sog["guidance_scale"],
            flat_color=sog["flat_color"],
            paca=PacaConfig(
                w_prime=paca["w_prime"],
                max_attention_resolution=paca["max_attention_resolution"],
            ),
        )

    def cc_config(self) -> CcConfig:
        cc = self.data["cc"]
        regca = self.data["regca"]
        return CcConfig(
            t_start=cc["t_start"],
            t_min=cc["t_min"],
            num_steps=cc["num_steps"],
            guidance_scale=cc["guidance_scale"],
            regca_separator=regca["separator"],
            regca_max_resolution=regca["max_attention_resolution"],
        )

    @property
    def backend_names(self) -> dict[str, str]:
        return dict(self.data["backends"])

    @property
    def output_dir(self) -> str:
        return self.data["output_dir"]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def to_dict(self) -> dict:
        """Deep-copied snapshot for provenance sidecars."""
        return json.loads(json.dumps(self.data))

    def validate(self) -> "EngineConfig":
        """Construct every nested parameter object so ranges are checked now."""
        self.make_schedule()
        self.sog_config()
        self.cc_config()
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")
        return self


def load_config(
    source: str | Path | Mapping | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> EngineConfig:
    """Merge defaults, an optional JSON config document, and overrides."""
    if source is None:
        file_data: Mapping = {}
    elif isinstance(source, Mapping):
        file_data = source
    else:
        path = Path(source)
        try:
            file_data = json.loads(path.read_text())
        except OSError as exc:
            raise ParseError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(
                "config is not valid JSON", location=f"{path}:{exc.lineno}:{exc.colno}"
            ) from exc
        if not isinstance(file_data, Mapping):
            raise ValidationError("config document must be a JSON object")
    problems: list[str] = []
    merged = _merge(DEFAULTS, file_data, "", problems)
    if problems:
        raise ValidationError(problems)
    if overrides:
        merged = apply_overrides(merged, overrides)
    return EngineConfig(data=merged).validate()
