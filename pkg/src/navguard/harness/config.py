"""Run configuration: one YAML file, strict keys, round-trips through parse -> serialize -> parse.

Sections: run, world, sensing, classical, reward, td3, nn, supervisor. Every section maps
onto the dataclass the corresponding module already uses, so a config only carries values
and never duplicates defaults.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from navguard.classical.dwa import DwaConfig
from navguard.nn.optim import AdamConfig
from navguard.rl.env import EnvConfig, PlannerConfig
from navguard.rl.reward import RewardConfig
from navguard.rl.td3 import TD3Config
from navguard.sensing import SensingConfig
from navguard.supervisor.fuzzy import FuzzyParams
from navguard.supervisor.switch import SupervisorConfig
from navguard.world.scenario import InvalidScenario, load_scenario
from navguard.world.state import RobotConfig, SocialForceParams

ALGORITHMS = ("dwa", "rl", "rl+dwa", "rl+dwa+supervisor")
DATA_CONFIGS = Path(__file__).resolve().parent.parent / "data" / "configs"


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class RunSection:
    scenario: str = "corridor_rooms"
    algorithm: str = "rl+dwa+supervisor"
    seeds: tuple[int, ...] = (0,)
    eval_steps: int = 10_000
    out: str = "runs"
    # trained policy used by evaluate / tune-supervisor; empty means train one first
    checkpoint: str = ""

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.eval_steps < 1:
            raise ValueError("eval_steps must be >= 1")


@dataclass(frozen=True)
class WorldSection:
    robot: RobotConfig = field(default_factory=RobotConfig)
    social: SocialForceParams = field(default_factory=SocialForceParams)
    dt: float = 0.1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class NetSection:
    trunk: tuple[int, ...] = (64, 64)
    # (channels, kernel, stride) per conv layer, used in costmap mode
    conv: tuple[tuple[int, int, int], ...] = ((16, 5, 3), (32, 3, 2))
    adam: AdamConfig = field(default_factory=lambda: AdamConfig(lr=1e-3))

    def __post_init__(self):
        object.__setattr__(self, "trunk", tuple(int(w) for w in self.trunk))
        object.__setattr__(self, "conv", tuple(tuple(int(v) for v in c) for c in self.conv))
        if not self.trunk or min(self.trunk) < 1:
            raise ValueError("trunk needs at least one positive width")
        if any(len(c) != 3 for c in self.conv):
            raise ValueError("conv layers are (channels, kernel, stride)")


@dataclass(frozen=True)
class SupervisorSection:
    params: FuzzyParams = field(default_factory=FuzzyParams)
    switch: SupervisorConfig = field(default_factory=SupervisorConfig)
    # optional front file written by tune-supervisor; when set it overrides ``params``
    front: str = ""
    # tuning budget and protocol
    population: int = 16
    generations: int = 16
    episodes: tuple[int, ...] = (1, 2, 3)
    scenarios: tuple[str, ...] = ("corridor_rooms",)
    noise_sigma: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "episodes", tuple(int(s) for s in self.episodes))
        object.__setattr__(self, "scenarios", tuple(str(s) for s in self.scenarios))
        if self.population < 2 or self.population % 2:
            raise ValueError("population must be an even number >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not self.episodes or not self.scenarios:
            raise ValueError("tuning needs at least one scenario and one episode seed")


@dataclass(frozen=True)
class Config:
    run: RunSection = field(default_factory=RunSection)
    world: WorldSection = field(default_factory=WorldSection)
    sensing: SensingConfig = field(default_factory=SensingConfig)
    classical: PlannerConfig = field(default_factory=PlannerConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    td3: TD3Config = field(default_factory=TD3Config)
    nn: NetSection = field(default_factory=NetSection)
    supervisor: SupervisorSection = field(default_factory=SupervisorSection)

    # -- derived objects ---------------------------------------------------

    def env_config(self) -> EnvConfig:
        return EnvConfig(robot=self.world.robot, social=self.world.social, sensing=self.sensing,
                         planner=self.classical, reward=self.reward, dt=self.world.dt)

    def td3_config(self) -> TD3Config:
        """The learner config for ``run.algorithm``: plain TD3 for "rl", E2TD3 otherwise."""
        if self.run.algorithm == "rl":
            kw = dataclasses.asdict(self.td3)
            kw.pop("lambda_reg")
            kw.pop("warmup")
            return TD3Config.plain(**kw)
        return self.td3

    def with_algorithm(self, algorithm: str) -> "Config":
        return with_overrides(self, {"run": {"algorithm": algorithm}})


# ---------------------------------------------------------------------------
# dict <-> dataclass

def _is_dataclass_type(tp) -> bool:
    return isinstance(tp, type) and dataclasses.is_dataclass(tp)


def _build(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kw = {}
    for name, value in data.items():
        tp = hints[name]
        if _is_dataclass_type(tp):
            kw[name] = _build(tp, value, f"{where}.{name}")
        elif isinstance(value, list):
            kw[name] = _tuplify(value)
        else:
            kw[name] = value
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _tuplify(v):
    return tuple(_tuplify(x) for x in v) if isinstance(v, (list, tuple)) else v


def _listify(v):
    return [_listify(x) for x in v] if isinstance(v, (list, tuple)) else v


def to_dict(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        out[f.name] = to_dict(v) if dataclasses.is_dataclass(v) else _listify(v)
    return out


def from_dict(data: dict) -> Config:
    return _build(Config, data, "config")


def dumps(cfg: Config) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=None)


def loads(text: str, where: str = "config") -> Config:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{where}: not valid YAML ({exc})") from None
    cfg = from_dict(data or {})
    validate(cfg)
    return cfg


def load_config(path) -> Config:
    path = Path(path)
    if not path.is_file():
        bundled = DATA_CONFIGS / f"{path}.yaml"
        if path.suffix or not bundled.is_file():
            raise ConfigError(f"config file not found: {path}")
        path = bundled
    return loads(path.read_text(), where=str(path))


def save_config(cfg: Config, path) -> None:
    Path(path).write_text(dumps(cfg))


def with_overrides(cfg: Config, changes: dict) -> Config:
    """Deep-merge ``changes`` into the dict form of ``cfg`` and rebuild it."""
    def merge(base, upd):
        for k, v in upd.items():
            if isinstance(v, dict) and isinstance(base.get(k), dict):
                merge(base[k], v)
            else:
                base[k] = v
        return base
    return from_dict(merge(to_dict(cfg), changes))


def validate(cfg: Config) -> None:
    """Cross-section checks: referenced scenarios and files exist."""
    for name in (cfg.run.scenario, *cfg.supervisor.scenarios):
        try:
            load_scenario(name)
        except InvalidScenario as exc:
            raise ConfigError(str(exc)) from None
    for ref in (cfg.run.checkpoint, cfg.supervisor.front):
        if ref and not Path(ref).is_file():
            raise ConfigError(f"referenced file not found: {ref}")
    if cfg.sensing.mode == "costmap" and not cfg.nn.conv:
        raise ConfigError("costmap observations need nn.conv layers")
