"""INI configuration with ``[env]``, ``[train]``, ``[agent]`` and ``[ga]`` sections.

Every key has a default; unknown sections or keys are rejected. A resolved
configuration is written back with all keys present, and re-reading it gives
an identical :class:`RunConfig`.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Iterable, Optional

from .agent import AgentConfig, Hyperparams
from .envs import ENVS
from .errors import ConfigError
from .ga import GaConfig
from .trainer import TrainConfig


@dataclass
class EnvConfig:
    name: str = "point-reach"


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    hp: Hyperparams = field(default_factory=Hyperparams)
    ga: GaConfig = field(default_factory=GaConfig)

    def validate(self) -> "RunConfig":
        if self.env.name not in ENVS:
            raise ConfigError(f"env.name: unknown env {self.env.name!r}", "env.name")
        for section, obj in (("train", self.train), ("agent", self.agent),
                             ("agent", self.hp), ("ga", self.ga)):
            try:
                obj.validate()
            except ValueError as exc:
                raise ConfigError(f"[{section}] {exc}", section) from None
        return self


# section -> attributes of RunConfig stored under it
SECTIONS = {
    "env": ("env",),
    "train": ("train",),
    "agent": ("agent", "hp"),
    "ga": ("ga",),
}


def _section_fields(cfg: RunConfig, section: str):
    for attr in SECTIONS[section]:
        obj = getattr(cfg, attr)
        for f in fields(obj):
            yield attr, f.name, getattr(obj, f.name)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, default, key: str):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(p) for p in text.split(",") if p.strip())
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type(default).__name__}", key) from None


def apply_values(cfg: RunConfig, values: Dict[str, Dict[str, str]]) -> RunConfig:
    """Return a copy of ``cfg`` with string ``values`` (``{section: {key: text}}``) applied."""
    out = RunConfig(replace(cfg.env), replace(cfg.train), replace(cfg.agent),
                    replace(cfg.hp), replace(cfg.ga))
    for section, items in values.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]", section)
        known = {name: (attr, default) for attr, name, default in _section_fields(out, section)}
        for key, text in items.items():
            full = f"{section}.{key}"
            if key not in known:
                raise ConfigError(f"unknown config key {full}", full)
            attr, default = known[key]
            setattr(getattr(out, attr), key, _parse(text, default, full))
    return out


def load_config(path, overrides: Optional[Iterable[str]] = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    values = {s: dict(parser.items(s)) for s in parser.sections()}
    cfg = apply_values(RunConfig(), values)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg.validate()


def apply_overrides(cfg: RunConfig, overrides: Iterable[str]) -> RunConfig:
    """Apply ``section.key=value`` strings."""
    values: Dict[str, Dict[str, str]] = {}
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        lhs, rhs = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        values.setdefault(section, {})[key] = rhs
    return apply_values(cfg, values)


def config_text(cfg: RunConfig) -> str:
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for _, name, value in _section_fields(cfg, section):
            lines.append(f"{name} = {_format(value)}")
        lines.append("")
    return "\n".join(lines)


def write_config(cfg: RunConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config_text(cfg), encoding="utf-8")
    return path


def hyperparams_text(hp: Hyperparams) -> str:
    return "[agent]\n" + "".join(f"{k} = {_format(v)}\n" for k, v in hp.as_dict().items())


def load_hyperparams(path) -> Hyperparams:
    """Read the six learning parameters from the ``[agent]`` section of an INI file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"hyperparameter file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read(path, encoding="utf-8")
    if not parser.has_section("agent"):
        raise ConfigError(f"{path}: missing [agent] section", "agent")
    known = Hyperparams().as_dict()
    # network/replay keys are allowed so a resolved config doubles as a hyperparameter file
    other = {f.name for f in fields(AgentConfig)}
    values = {}
    for key, text in parser.items("agent"):
        if key in other:
            continue
        if key not in known:
            raise ConfigError(f"unknown hyperparameter agent.{key}", f"agent.{key}")
        values[key] = _parse(text, known[key], f"agent.{key}")
    try:
        return Hyperparams(**{**known, **values}).validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
