"""JSON run configuration with strict field checking and a stable echo-back."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import get_type_hints

from .comparison_ode import CurvatureProfile
from .io import dump_json

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "ProfileConfig",
    "PerturbationConfig",
    "CurveConfig",
    "PlateauConfig",
    "ExpansionConfig",
    "BlowupConfig",
    "RunConfig",
    "parse_config",
    "config_from_dict",
    "echo_config",
    "auto_s_max",
]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class ProfileConfig:
    kind: str = "constant"
    value: float = -1.0
    grid: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    id: str = ""
    params: dict[str, float] = field(default_factory=dict)
    # declared bound k <= -a^2; 0 asks for the value read off the profile
    a: float = 0.0
    # 0 picks the smallest window for which the ball-model tail meets 1e-9
    s_max: float = 0.0
    tol: float = 1e-10


@dataclass
class PerturbationConfig:
    name: str = "identity"
    eps: float = 0.2
    width: float = 0.5


@dataclass
class CurveConfig:
    name: str = "equator"
    # optional path to a whitespace separated file of unit vectors, one per line
    file: str = ""
    n: int = 4096
    params: dict[str, float] = field(default_factory=dict)


@dataclass
class PlateauConfig:
    gtol: float = 1e-7
    max_iter: int = 3000
    rounds: int = 4
    gap_factor: float = 1e-4
    memory: int = 30
    gap_cap: float = 8.0


@dataclass
class ExpansionConfig:
    coarse_level: int = 2
    s_fractions: list[float] = field(default_factory=lambda: [0.25, 0.5, 0.625, 0.75, 0.875, 1.0])
    area_tol: float = 0.05
    recenter: bool = True
    window: float = 0.25
    threshold: float = 0.9
    clip_tol: float = 1e-3
    linear_area_diagnostic: bool = False


@dataclass
class BlowupConfig:
    k_index: int = 8
    threshold: float = 0.9
    max_depth: int = 3
    delta: float = 0.01
    radius: float = 0.8
    resolve: bool = False


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    profile: ProfileConfig = field(default_factory=ProfileConfig)
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    curve: CurveConfig = field(default_factory=CurveConfig)
    dimension: int = 3
    level: int = 5
    schedule: list[float] = field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    plateau: PlateauConfig = field(default_factory=PlateauConfig)
    expansion: ExpansionConfig = field(default_factory=ExpansionConfig)
    blowup: BlowupConfig = field(default_factory=BlowupConfig)
    out_dir: str = "runs"
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def curvature_profile(self) -> CurvatureProfile:
        return _build_profile(self.profile, "profile")


def _coerce(value, tp, path: str):
    origin = getattr(tp, "__origin__", None)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        return _from_dict(tp, value, path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        (item,) = tp.__args__
        return [_coerce(v, item, f"{path}[{i}]") for i, v in enumerate(value)]
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        _, item = tp.__args__
        return {str(k): _coerce(v, item, f"{path}.{k}") for k, v in sorted(value.items())}
    raise ConfigError(f"{path}: unsupported type {tp!r}")


def _from_dict(cls, data: dict, path: str = ""):
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown field {path + '.' if path else ''}{key}")
    kwargs = {k: _coerce(v, hints[k], f"{path + '.' if path else ''}{k}") for k, v in data.items()}
    return cls(**kwargs)


def _build_profile(p: ProfileConfig, path: str, probe: float | None = None) -> CurvatureProfile:
    a = p.a
    if p.kind == "constant":
        if p.value >= 0:
            raise ConfigError(f"{path}.value: curvature must be negative (got {p.value:g})")
        prof = CurvatureProfile.constant(p.value, a=a if a > 0 else None)
    elif p.kind == "samples":
        prof = CurvatureProfile.samples(p.grid, p.values, a=a)
    elif p.kind == "closed-form":
        prof = CurvatureProfile.closed_form(p.id, p.params, a=a)
    else:
        raise ConfigError(f"{path}.kind: unknown profile kind {p.kind!r}")
    s_max = probe if probe is not None else p.s_max
    try:
        s = prof.validate(s_max)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if prof.a <= 0:
        # read the uniform bound off the probe grid (held beyond the last node)
        k_max = float(prof(s).max())
        if k_max >= 0:
            raise ConfigError(f"{path}: curvature must stay below a negative constant (a = 0)")
        prof = dataclasses.replace(prof, a=math.sqrt(-k_max))
    return prof


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported version {version!r} (expected {SCHEMA_VERSION})")
    cfg = _from_dict(RunConfig, data)
    if cfg.profile.s_max <= 0:
        cfg.profile.s_max = auto_s_max(_build_profile(cfg.profile, "profile", probe=32.0).a, cfg.schedule)
    _validate(cfg)
    return cfg


def auto_s_max(a: float, schedule, tail_tol: float = 1e-9) -> float:
    """Window where the tail bracket pi / (2 a F) drops below ``tail_tol`` (F >= e^{as} / 2a)."""
    s = math.log(math.pi / tail_tol) / a + 2.0
    return float(math.ceil(max(s, max(schedule, default=0.0) + 2.0)))


def _validate(cfg: RunConfig) -> None:
    cfg.curvature_profile()
    if cfg.dimension < 3:
        raise ConfigError("dimension: must be >= 3")
    if not 0 <= cfg.level <= 7:
        raise ConfigError("level: must lie in [0, 7]")
    if not cfg.schedule or any(r <= 0 for r in cfg.schedule):
        raise ConfigError("schedule: needs positive radii")
    if any(b <= a for a, b in zip(cfg.schedule[:-1], cfg.schedule[1:])):
        raise ConfigError("schedule: must be strictly increasing")
    if cfg.schedule[-1] >= cfg.profile.s_max:
        raise ConfigError("schedule: radii must stay below profile.s_max")
    if not cfg.curve.file and not cfg.curve.name:
        raise ConfigError("curve: needs a name or a file")
    if cfg.seed < 0:
        raise ConfigError("seed: must be non-negative")


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def echo_config(cfg: RunConfig) -> str:
    """Fully expanded config as canonical JSON text."""
    return dump_json(cfg.to_dict())
