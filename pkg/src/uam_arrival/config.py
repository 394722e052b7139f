"""Run configuration: one YAML file, sections mirror the subsystems.

Lookup order for every key: built-in default < config file < environment
variable ``UAM_<SECTION>__<KEY>`` < command-line ``--set section.key=value``.
Unknown sections or keys are rejected.
"""
from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field, fields
from typing import Any, Mapping, Optional

import yaml

from .geometry import AirspaceConfig
from .observation import ObservationScales
from .reward import RewardConfig

ENV_PREFIX = "UAM_"


class ConfigError(ValueError):
    pass


@dataclass
class NetworkConfig:
    history: int = 3
    hidden: int = 64


@dataclass
class TD3Config:
    # not given in the source work; common TD3 settings
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    batch_size: int = 32
    buffer_size: int = 1_000_000
    learning_starts: int = 10_000
    updates_per_step: int = 1
    actor_lr: float = 1e-4
    critic_lr: float = 1e-4
    explore_sigma: float = 0.1
    explore_background: bool = False


@dataclass
class CurriculumConfig:
    enabled: bool = True
    boundaries: list = field(default_factory=lambda: [0, 1_000_000, 1_500_000, 2_000_000])
    ranges: list = field(default_factory=lambda: [[3, 8], [8, 15], [15, 25]])
    fixed_count: int = 25      # used when enabled is false ("No CL")


@dataclass
class TrainingConfig:
    seed: int = 0
    total_steps: int = 2_000_000
    episode_steps: int = 250
    signal_step: int = 200
    eval_every: int = 5000
    eval_episodes: int = 5
    smoothing: float = 0.8
    milestones: list = field(default_factory=lambda: [0, 100_000, 500_000, 2_000_000])
    checkpoint_every: int = 100_000


@dataclass
class EvaluationConfig:
    entrance_clearance: float = 300.0
    n_set: list = field(default_factory=lambda: [5, 10, 15, 20, 25, 30])
    reps: int = 30
    stream_gap: float = 15.0
    stream_heading_noise_deg: float = 20.0
    speed_min: float = 10.0
    speed_max: float = 16.0
    wave_count: int = 3
    wave_gap: float = 30.0
    wave_speed: float = 13.0
    poisson_clusters: int = 4
    poisson_cluster_gap: float = 120.0
    poisson_lambda: float = 5.0
    poisson_intra_gap: float = 10.0
    poisson_gate: str = "S"
    noise_sigmas: list = field(default_factory=lambda: [0.0, 10.0, 20.0, 100.0])
    max_time: float = 3600.0
    marker_interval: float = 20.0
    kde_extent: float = 1200.0
    kde_cells: int = 200


@dataclass
class AirspaceSection:
    vtol_radius: float = 200.0
    outer_radius: float = 800.0
    boundary_penalty_radius: float = 1000.0
    reinit_radius: float = 1200.0
    d_acc: float = 10.0
    d_inc: float = 100.0
    t_land: float = 60.0
    dt: float = 1.0
    heading_increment_deg: float = 5.0

    def build(self) -> AirspaceConfig:
        kw = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "heading_increment_deg"}
        return AirspaceConfig(heading_increment=math.radians(self.heading_increment_deg), **kw)


@dataclass
class ObservationSection:
    d_scale: float = 1000.0
    v_scale: float = 6.0
    cpa_d_scale: float = 100.0
    t_scale: float = 60.0

    def build(self) -> ObservationScales:
        return ObservationScales(**dataclasses.asdict(self))


@dataclass
class RewardSection:
    d_inc: float = 100.0
    collision_penalty: float = -10.0
    c1: float = -5.0
    c2: float = 160.5
    c4: float = 10.0
    c5: float = 200.0
    false_entrance_penalty: float = -5.0
    boundary_radius: float = 1000.0
    boundary_penalty: float = -5.0
    w_coll: float = 3 / 7
    w_goal: float = 3 / 7
    w_space: float = 2 / 7
    w_comf: float = 2 / 7

    def build(self) -> RewardConfig:
        return RewardConfig(**dataclasses.asdict(self))


@dataclass
class Config:
    airspace: AirspaceSection = field(default_factory=AirspaceSection)
    observation: ObservationSection = field(default_factory=ObservationSection)
    reward: RewardSection = field(default_factory=RewardSection)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    td3: TD3Config = field(default_factory=TD3Config)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)

    def get(self, dotted: str):
        section, key = _split(dotted)
        return getattr(getattr(self, section), key)


def _split(dotted: str):
    if dotted.count(".") != 1:
        raise ConfigError(f"config key {dotted!r} must look like section.key")
    return dotted.split(".")


def _coerce(current: Any, value: Any, where: str):
    """Convert value to the type of the current default."""
    if isinstance(value, str) and not isinstance(current, str):
        value = yaml.safe_load(value)
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(current, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(current, float):
        if isinstance(value, str):
            # YAML 1.1 reads exponent forms without a dot ("3e-3") as strings
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(current, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return value
    if isinstance(current, str):
        return str(value)
    return value


def apply_mapping(cfg: Config, data: Mapping, source: str = "config") -> Config:
    if data is None:
        return cfg
    if not isinstance(data, Mapping):
        raise ConfigError(f"{source}: top level must be a mapping of sections")
    for section, values in data.items():
        if not hasattr(cfg, section) or section.startswith("_"):
            raise ConfigError(f"{source}: unknown section {section!r}")
        sec = getattr(cfg, section)
        if not isinstance(values, Mapping):
            raise ConfigError(f"{source}: section {section!r} must be a mapping")
        known = {f.name for f in fields(sec)}
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"{source}: unknown key {section}.{key}")
            setattr(sec, key, _coerce(getattr(sec, key), value, f"{source}: {section}.{key}"))
    return cfg


def apply_overrides(cfg: Config, overrides: list[str], source: str = "--set") -> Config:
    data: dict = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"{source}: expected section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        section, name = _split(key.strip())
        data.setdefault(section, {})[name] = value
    return apply_mapping(cfg, data, source)


def apply_environment(cfg: Config, environ: Optional[Mapping[str, str]] = None) -> Config:
    environ = os.environ if environ is None else environ
    data: dict = {}
    for var, value in environ.items():
        if not var.startswith(ENV_PREFIX) or "__" not in var:
            continue
        section, key = var[len(ENV_PREFIX):].lower().split("__", 1)
        data.setdefault(section, {})[key] = value
    return apply_mapping(cfg, data, "environment")


def validate(cfg: Config) -> Config:
    cfg.airspace.build()
    c = cfg.curriculum
    if len(c.boundaries) != len(c.ranges) + 1 or sorted(c.boundaries) != c.boundaries:
        raise ConfigError("curriculum.boundaries must be sorted with one more entry than ranges")
    for lo_hi in c.ranges:
        if len(lo_hi) != 2 or not 1 <= lo_hi[0] <= lo_hi[1]:
            raise ConfigError(f"curriculum range {lo_hi!r} invalid")
    t = cfg.training
    if not 0 < t.signal_step <= t.episode_steps:
        raise ConfigError("training.signal_step must lie in (0, episode_steps]")
    if t.eval_every <= 0 or t.eval_episodes < 1:
        raise ConfigError("training.eval_every and eval_episodes must be positive")
    if not 0.0 <= t.smoothing < 1.0:
        raise ConfigError("training.smoothing must lie in [0, 1)")
    if cfg.td3.batch_size < 1 or cfg.td3.policy_delay < 1:
        raise ConfigError("td3.batch_size and td3.policy_delay must be >= 1")
    if cfg.network.history < 1:
        raise ConfigError("network.history must be >= 1")
    return cfg


def load_config(path: Optional[str] = None, overrides: Optional[list] = None,
                environ: Optional[Mapping[str, str]] = None) -> Config:
    cfg = Config()
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
        apply_mapping(cfg, data, str(path))
    apply_environment(cfg, environ)
    apply_overrides(cfg, overrides or [])
    return validate(cfg)


def loads_config(text: str) -> Config:
    return validate(apply_mapping(Config(), yaml.safe_load(text), "<string>"))
