from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..critic.maddpg import MADDPGConfig
from ..critic.train import AC_ALGORITHMS, ACConfig
from ..envs import REGISTRY
from ..errors import ConfigError
from ..factorization.losses import ALGORITHMS as VF_ALGORITHMS
from ..factorization.train import VFConfig

CONTINUOUS = ("maddpg-lite",)
ALL_ALGORITHMS = VF_ALGORITHMS + AC_ALGORITHMS + CONTINUOUS
CONTINUOUS_ENVS = ("sum-game",)


def family(algorithm: str) -> str:
    if algorithm in VF_ALGORITHMS:
        return "value"
    if algorithm in AC_ALGORITHMS:
        return "actor-critic"
    if algorithm in CONTINUOUS:
        return "continuous"
    raise ConfigError(f"unknown algorithm {algorithm!r}", field="algorithm")


# YAML 1.1 reads "1e-3" (no dot) as a string
_FLOAT = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")


def coerce_scalar(value):
    if isinstance(value, str) and _FLOAT.match(value):
        return float(value)
    return value


PARAM_TYPES = {"value": VFConfig, "actor-critic": ACConfig, "continuous": MADDPGConfig}
# fields the experiment config sets itself rather than through ``params``
RESERVED = {"algorithm", "episodes", "steps", "eval_every"}


@dataclass
class ExperimentConfig:
    env: str
    algorithm: str
    seeds: list = field(default_factory=lambda: [0])
    episodes: int = 1000                  # episode budget (update steps for maddpg-lite)
    eval_every: int = 0                   # 0: only at the end
    eval_episodes: int = 0                # Monte-Carlo greedy/stochastic evaluation episodes
    env_params: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    out: str = "runs"
    name: str = "experiment"

    def validate(self) -> "ExperimentConfig":
        fam = family(self.algorithm)
        if fam == "continuous":
            if self.env not in CONTINUOUS_ENVS:
                raise ConfigError(f"{self.algorithm} needs a continuous environment", field="env")
        elif self.env not in REGISTRY and not Path(self.env).is_file():
            raise ConfigError(f"environment {self.env!r} is neither built in nor a model file", field="env")
        if not self.seeds:
            raise ConfigError("at least one seed is required", field="seeds")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct", field="seeds")
        if self.episodes < 1:
            raise ConfigError("episode budget must be positive", field="episodes")
        if self.eval_every < 0 or self.eval_episodes < 0:
            raise ConfigError("evaluation settings must be non-negative", field="eval_every")
        allowed = {f.name for f in dataclasses.fields(PARAM_TYPES[fam])} - RESERVED
        for key in self.params:
            if key not in allowed:
                raise ConfigError(f"unknown hyperparameter {key!r} for {self.algorithm}", field=f"params.{key}")
        self.algo_config().validate()
        return self

    def algo_config(self):
        fam = family(self.algorithm)
        cls = PARAM_TYPES[fam]
        if fam == "continuous":
            return cls(steps=self.episodes, eval_every=self.eval_every, **self.params)
        kw = dict(self.params)
        kw.setdefault("eval_episodes", self.eval_episodes)
        return cls(algorithm=self.algorithm, episodes=self.episodes, eval_every=self.eval_every, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping", field="<root>")
        names = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in names:
                raise ConfigError(f"unknown config key {key!r}", field=key)
        for key in ("env", "algorithm"):
            if key not in data:
                raise ConfigError("required", field=key)
        data = dict(data)
        for key in ("params", "env_params"):
            if isinstance(data.get(key), dict):
                data[key] = {k: coerce_scalar(v) for k, v in data[key].items()}
        return cls(**data).validate()


def load_config(path) -> ExperimentConfig:
    """YAML or JSON (JSON is read by the YAML loader too)."""
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}", field="<file>") from None
    return ExperimentConfig.from_dict(data)
