"""Run configuration: flat key-value file with sections (INI syntax).

Documented key set (every key optional; defaults shown in README):

    [clients]            planner = oracle | adversarial | http
                         grounder = oracle | widebox | http
    [clients.planner_http]   url, model, api_key_env, timeout_s,
                             max_attempts, backoff_s,
                             price_input_per_1k, price_output_per_1k
    [clients.grounder_http]  same keys
    [pipeline]           max_steps, success_radius, pixel_strategy,
                         backtrack_policy, history_mode, history_budget,
                         commands_per_step, replan_interval,
                         reach_tolerance, goal_project_radius,
                         probe_distance, reask_budget, temperature,
                         max_tokens, seed
    [control]            forward_step, turn_deg
    [mapping]            resolution, inflation_radius

Unknown sections or keys raise ConfigError so typos fail loudly.
Credentials come only from the environment variable named by
``api_key_env``, never from the file.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .client import HttpClientConfig
from .errors import ConfigError
from .geometry import PixelSelection
from .history import BacktrackPolicy, HistoryMode
from .pipeline import EpisodeConfig

PLANNER_KINDS = ("oracle", "adversarial", "http")
GROUNDER_KINDS = ("oracle", "widebox", "http")


@dataclass
class RunConfig:
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    planner: str = "oracle"
    grounder: str = "oracle"
    planner_http: HttpClientConfig | None = None
    grounder_http: HttpClientConfig | None = None


_PIPELINE_KEYS = {
    "max_steps": int,
    "success_radius": float,
    "history_budget": int,
    "commands_per_step": int,
    "replan_interval": int,
    "reach_tolerance": float,
    "goal_project_radius": float,
    "probe_distance": float,
    "reask_budget": int,
    "temperature": float,
    "max_tokens": int,
    "seed": int,
}

_HTTP_KEYS = {
    "url": str,
    "model": str,
    "api_key_env": str,
    "timeout_s": float,
    "max_attempts": int,
    "backoff_s": float,
    "price_input_per_1k": float,
    "price_output_per_1k": float,
}

_KNOWN_SECTIONS = {
    "clients",
    "clients.planner_http",
    "clients.grounder_http",
    "pipeline",
    "control",
    "mapping",
}


def _enum_by_value(enum_cls, raw: str, what: str):
    for member in enum_cls:
        if member.value == raw:
            return member
    valid = ", ".join(m.value for m in enum_cls)
    raise ConfigError(f"{what} must be one of: {valid} (got {raw!r})")


def _http_config(section) -> HttpClientConfig:
    kwargs = {}
    for key, value in section.items():
        if key not in _HTTP_KEYS:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]")
        kwargs[key] = _HTTP_KEYS[key](value)
    if "url" not in kwargs or "model" not in kwargs:
        raise ConfigError(f"[{section.name}] needs at least url and model")
    return HttpClientConfig(**kwargs)


def load_config(path: str | None = None) -> RunConfig:
    """Parse a config file; with no path, return all defaults."""
    cfg = RunConfig()
    if path is None:
        return cfg

    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path!r} not found or unreadable")

    for name in parser.sections():
        if name not in _KNOWN_SECTIONS:
            raise ConfigError(f"unknown config section [{name}]")

    if parser.has_section("clients"):
        for key, value in parser["clients"].items():
            if key == "planner":
                if value not in PLANNER_KINDS:
                    raise ConfigError(f"planner must be one of {PLANNER_KINDS}")
                cfg.planner = value
            elif key == "grounder":
                if value not in GROUNDER_KINDS:
                    raise ConfigError(f"grounder must be one of {GROUNDER_KINDS}")
                cfg.grounder = value
            else:
                raise ConfigError(f"unknown key {key!r} in [clients]")

    if parser.has_section("clients.planner_http"):
        cfg.planner_http = _http_config(parser["clients.planner_http"])
    if parser.has_section("clients.grounder_http"):
        cfg.grounder_http = _http_config(parser["clients.grounder_http"])
    if cfg.planner == "http" and cfg.planner_http is None:
        raise ConfigError("planner=http needs a [clients.planner_http] section")
    if cfg.grounder == "http" and cfg.grounder_http is None:
        raise ConfigError("grounder=http needs a [clients.grounder_http] section")

    ep = cfg.episode
    if parser.has_section("pipeline"):
        for key, value in parser["pipeline"].items():
            if key == "pixel_strategy":
                ep.pixel_strategy = _enum_by_value(PixelSelection, value, "pixel_strategy")
            elif key == "backtrack_policy":
                ep.backtrack_policy = _enum_by_value(BacktrackPolicy, value, "backtrack_policy")
            elif key == "history_mode":
                ep.history_mode = _enum_by_value(HistoryMode, value, "history_mode")
            elif key in _PIPELINE_KEYS:
                setattr(ep, key, _PIPELINE_KEYS[key](value))
            else:
                raise ConfigError(f"unknown key {key!r} in [pipeline]")

    if parser.has_section("control"):
        for key, value in parser["control"].items():
            if key == "forward_step":
                ep.forward_step = float(value)
            elif key == "turn_deg":
                ep.turn_angle = math.radians(float(value))
            else:
                raise ConfigError(f"unknown key {key!r} in [control]")

    if parser.has_section("mapping"):
        for key, value in parser["mapping"].items():
            if key == "resolution":
                ep.map_resolution = float(value)
            elif key == "inflation_radius":
                ep.inflation_radius = float(value)
            else:
                raise ConfigError(f"unknown key {key!r} in [mapping]")

    return cfg
