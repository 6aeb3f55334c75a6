"""Flat key=value run configuration with layered overrides.

Precedence, lowest to highest: built-in defaults, config file, ITSEEK_*
environment variables, command-line --set overrides. Unknown keys are
rejected everywhere so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .baselines import ImputeConfig
from .features import ReceptorConfig
from .model import AgentConfig
from .series import ConfigError, SplitSpec
from .training import TrainConfig

__all__ = ["ConfigError", "RunConfig", "parse_config_file", "ENV_PREFIX"]

ENV_PREFIX = "ITSEEK_"

METHODS = ("cat", "gru-mean", "gru-interp", "gru-delta-t", "gru-mask")


@dataclass(frozen=True)
class RunConfig:
    # receptor
    delta: float = 0.2
    w: int = 50
    alpha: float = 100.0
    receptor_dim: int = 50
    use_density: bool = True
    coarse_width: float = 1.0
    # agent
    k: int = 3
    hidden: int = 64
    sigma: float = 0.05
    num_classes: int = 2
    # optimization
    lr: float = 1e-3
    weight_decay: float = 1e-5
    epochs: int = 200
    batch_size: int = 1
    eval_every: int = 1
    seed: int = 0
    # data split
    train_frac: float = 0.8
    val_frac: float = 0.0
    test_frac: float = 0.2
    split_mode: str = "random"
    # method selection and baselines
    method: str = "cat"
    grid_size: int = 500
    baseline_hidden: int = 64
    # synthetic dataset (used by sweeps that generate their own data)
    n: int = 5000
    series_len: int = 500
    signal_width: float = 0.10
    noise_in_window: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r} (choices: {', '.join(METHODS)})")

    def receptor(self) -> ReceptorConfig:
        return ReceptorConfig(self.delta, self.w, self.alpha, self.receptor_dim, self.use_density, self.coarse_width)

    def agent(self) -> AgentConfig:
        return AgentConfig(self.num_classes, self.k, self.hidden, self.sigma)

    def train(self) -> TrainConfig:
        return TrainConfig(self.lr, self.weight_decay, self.epochs, self.batch_size, self.seed, self.eval_every)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.train_frac, self.val_frac, self.test_frac, self.seed, self.split_mode)

    def impute(self) -> ImputeConfig:
        from .experiments import impute_config_for

        return impute_config_for(self.method, self.grid_size)

    def mpi(self) -> "MpiConfig":
        from .synth import MpiConfig

        return MpiConfig(self.n, self.series_len, self.signal_width, self.seed, self.noise_in_window)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def load(
        cls,
        path: str | None = None,
        overrides: list[str] | None = None,
        env: dict | None = None,
    ) -> "RunConfig":
        """Layer file, environment, and key=value overrides on defaults."""
        values: dict = {}
        if path is not None:
            values.update(parse_config_file(path))
        environ = os.environ if env is None else env
        for key, raw in environ.items():
            if key.startswith(ENV_PREFIX):
                values[key[len(ENV_PREFIX) :].lower()] = raw
        for item in overrides or []:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, raw = item.split("=", 1)
            values[key.strip()] = raw.strip()
        return cls._from_strings(values)

    @classmethod
    def _from_strings(cls, values: dict) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        parsed = {}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            parsed[key] = raw if not isinstance(raw, str) else _parse_value(key, raw, types[key])
        try:
            return cls(**parsed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _parse_value(key: str, raw: str, type_name: str):
    if type_name == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if type_name == "int":
            return int(raw)
        if type_name == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {type_name}, got {raw!r}") from None
    return raw


def parse_config_file(path: str) -> dict[str, str]:
    """Read `key = value` lines; blank lines and # comments are skipped."""
    values: dict[str, str] = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{line_no}: expected key = value, got {line.strip()!r}")
            key, raw = text.split("=", 1)
            values[key.strip()] = raw.strip()
    return values
