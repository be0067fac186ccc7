"""
One JSON document configuring the whole pipeline.

Every section mirrors a frozen dataclass; omitted keys keep their defaults
and unknown keys are rejected. The ``train`` section starts from a named
preset (``"desk"`` unless given) and applies any remaining keys on top.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .augment import AugPolicy
from .encoder import EncoderConfig
from .errors import ConfigError, EdamrdError
from .features import FeatureConfig
from .pipeline import REPRESENTATIONS, SignalConfig, canonical_name
from .trainer import PRESETS, TrainConfig, with_overrides
from .tvsymp import TvsympConfig

FUSIONS = ("mrd", "add", "concat")


@dataclass(frozen=True)
class RenderConfig:
    order: tuple[str, ...] = REPRESENTATIONS
    line_thickness_px: int = 2


@dataclass(frozen=True)
class PipelineConfig:
    signal: SignalConfig = field(default_factory=SignalConfig)
    tvsymp: TvsympConfig = field(default_factory=TvsympConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    preset: str = "desk"
    train: TrainConfig = field(default_factory=lambda: PRESETS["desk"])
    augment: AugPolicy = field(default_factory=AugPolicy)
    fusion: str = "mrd"
    seed: int = 0

    def __post_init__(self):
        if self.fusion not in FUSIONS:
            raise ConfigError(f"fusion must be one of {FUSIONS}, got {self.fusion!r}")
        order = tuple(canonical_name(n) for n in self.render.order)
        if not order:
            raise ConfigError("render.order must name at least one representation")
        if self.fusion != "mrd" and len(order) < 2:
            raise ConfigError("late fusion needs at least two representations in render.order")
        if order != self.render.order:
            object.__setattr__(self, "render", dataclasses.replace(self.render, order=order))

    @property
    def n_views(self) -> int:
        return 1 if self.fusion == "mrd" else len(self.render.order)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _coerce(value, default, where):
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        if default and isinstance(default[0], tuple):
            return tuple(_coerce(v, default[0], where) for v in value)
        return tuple(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, (int, float)) and (not isinstance(value, (int, float)) or isinstance(value, bool)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if isinstance(default, int) and not isinstance(default, bool) and isinstance(value, float):
        if not value.is_integer():
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string, got {value!r}")
    return value


def build_dataclass(cls, data, where: str, base=None):
    """Instantiate ``cls`` from a JSON object, recursing into nested dataclasses."""
    base = base if base is not None else cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        default = getattr(base, key)
        sub = f"{where}.{key}"
        if dataclasses.is_dataclass(default):
            kwargs[key] = build_dataclass(type(default), value, sub, default)
        elif default is None:
            kwargs[key] = value
        else:
            kwargs[key] = _coerce(value, default, sub)
    try:
        return dataclasses.replace(base, **kwargs)
    except EdamrdError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    data = dict(data)
    train = data.pop("train", {})
    if not isinstance(train, dict):
        raise ConfigError("train: expected an object")
    train = dict(train)
    preset = train.pop("preset", data.pop("preset", "desk"))
    if preset not in PRESETS:
        raise ConfigError(f"unknown training preset {preset!r}; known: {', '.join(sorted(PRESETS))}")
    cfg = build_dataclass(PipelineConfig, data, "config", PipelineConfig(preset=preset, train=PRESETS[preset]))
    if "seed" in data and "seed" not in train:
        train["seed"] = data["seed"]
    train_cfg = build_dataclass(TrainConfig, train, "train", PRESETS[preset])
    return dataclasses.replace(cfg, train=train_cfg)


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from None
    return config_from_dict(data)


def with_seed(cfg: PipelineConfig, seed: int) -> PipelineConfig:
    """Set the pipeline seed and the training seed together."""
    return dataclasses.replace(cfg, seed=seed, train=with_overrides(cfg.train, seed=seed))
