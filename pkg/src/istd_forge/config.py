"""Pipeline configuration: one JSON document, one section per stage.

Missing sections and keys fall back to the module defaults. Unknown keys are
rejected so that a typo never silently runs the default setting.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .brd import BrdConfig, GridSpec
from .degrade import DegradationSpec
from .harvest import DisConfig
from .metrics import DetectionParams
from .noiselab import MixConfig, NoiseRegionConfig
from .regen import RegenConfig, SsimParams
from .wavelet import WmfConfig

SECTIONS = {
    "wmf": WmfConfig,
    "grid": GridSpec,
    "brd": BrdConfig,
    "dis": DisConfig,
    "ssim": SsimParams,
    "regen": RegenConfig,
    "noise_region": NoiseRegionConfig,
    "mix": MixConfig,
    "degrade": DegradationSpec,
    "detection": DetectionParams,
}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    wmf: WmfConfig = field(default_factory=WmfConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    brd: BrdConfig = field(default_factory=BrdConfig)
    dis: DisConfig = field(default_factory=DisConfig)
    ssim: SsimParams = field(default_factory=SsimParams)
    regen: RegenConfig = field(default_factory=RegenConfig)
    noise_region: NoiseRegionConfig = field(default_factory=NoiseRegionConfig)
    mix: MixConfig = field(default_factory=MixConfig)
    degrade: DegradationSpec = field(default_factory=DegradationSpec)
    detection: DetectionParams = field(default_factory=DetectionParams)
    seed: int = 0
    upsample_backgrounds: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        kwargs = {}
        for key in ("seed", "upsample_backgrounds"):
            if key in data:
                kwargs[key] = data.pop(key)
        for name, value in data.items():
            if name not in SECTIONS:
                raise ConfigError(f"unknown config section {name!r}")
            if not isinstance(value, dict):
                raise ConfigError(f"section {name!r} must be an object")
            known = {f.name for f in fields(SECTIONS[name])}
            unknown = set(value) - known
            if unknown:
                raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
            try:
                if name == "degrade":
                    kwargs[name] = DegradationSpec.from_dict(value)
                else:
                    kwargs[name] = SECTIONS[name](**value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid {name!r} section: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self), default=str))


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``section.key=value`` overrides; values are parsed as JSON when possible."""
    data = json.loads(json.dumps(data))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = value
    return data
