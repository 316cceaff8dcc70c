"""Declarative run configuration (YAML) with strict schema validation.

Unknown keys are rejected with their line number so ablation arms cannot
silently diverge. ``resolve`` returns the full config with every default
filled in; that echo is written into each run directory.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .pipeline import LapoConfig
from .policy_env import EnvModel, PolicyParams, support_mass
from .rewards import GuidanceMode
from .stats import TargetStatistic
from .types import ConfigError, Problem, RewardConfig, SigmaMode, StageConfig, default_bank, load_bank

SCHEMA_VERSION = 1

_STAGE_DEFAULTS = {
    "episodes": 3,
    "steps_per_episode": 80,
    "rollouts_per_problem": 8,
    "batch_size": 128,
    "learning_rate": 0.05,
}

DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "seed": 7,
    "output_dir": "runs/lapo",
    "threads": 1,
    "guidance": "exact",
    "target_statistic": "median",
    "bank": {"path": None, "tiers": 5, "per_tier": 40, "benchmark_tag": "synthetic"},
    "eval": {"samples": 8, "bank_path": None},
    "policy": {"init_length": 1800.0, "sigma_gen": 0.25},
    "env": {"p_max_base": 0.98, "p_max_slope": 0.12, "tau_per_difficulty": 300.0, "max_generation_length": 4096},
    "reward": {"alpha": 0.7, "beta": 0.8, "sigma_ratio": 0.1, "sigma_tokens": None, "distance_scale": 100.0},
    "discovery": dict(_STAGE_DEFAULTS),
    "internalization": dict(_STAGE_DEFAULTS),
}

_TYPES: dict[str, tuple[type, ...]] = {
    "schema_version": (int,), "seed": (int,), "output_dir": (str,), "threads": (int,),
    "guidance": (str,), "target_statistic": (str,),
    "bank.path": (str, type(None)), "bank.tiers": (int,), "bank.per_tier": (int,), "bank.benchmark_tag": (str,),
    "eval.samples": (int,), "eval.bank_path": (str, type(None)),
    "policy.init_length": (int, float), "policy.sigma_gen": (int, float),
    "env.p_max_base": (int, float), "env.p_max_slope": (int, float), "env.tau_per_difficulty": (int, float),
    "env.max_generation_length": (int,),
    "reward.alpha": (int, float), "reward.beta": (int, float), "reward.sigma_ratio": (int, float, type(None)),
    "reward.sigma_tokens": (int, type(None)), "reward.distance_scale": (int, float),
}
for _stage in ("discovery", "internalization"):
    for _k, _v in _STAGE_DEFAULTS.items():
        _TYPES[f"{_stage}.{_k}"] = (int, float) if isinstance(_v, float) else (int,)


def _line_index(text: str) -> dict[str, int]:
    """Map dotted key paths to 1-based source lines."""
    lines: dict[str, int] = {}

    def walk(node: yaml.Node, prefix: str) -> None:
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = f"{prefix}{k.value}"
                lines[key] = k.start_mark.line + 1
                walk(v, key + ".")

    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if root is not None:
        walk(root, "")
    return lines


def _merge(defaults: dict, given: dict, prefix: str, lines: dict[str, int], source: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        path = f"{prefix}{key}"
        where = f"{source}:{lines.get(path, '?')}"
        if key not in defaults:
            raise ConfigError(f"{where}: unknown key '{path}'")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: '{path}' must be a mapping")
            out[key] = _merge(defaults[key], value, path + ".", lines, source)
            continue
        allowed = _TYPES[path]
        if isinstance(value, bool) or not isinstance(value, allowed):
            names = "/".join("null" if t is type(None) else t.__name__ for t in allowed)
            raise ConfigError(f"{where}: '{path}' must be {names}, got {value!r}")
        out[key] = value
    return out


def resolve(raw: dict | None, source: str = "<config>", text: str | None = None) -> dict:
    """Validate a raw mapping and fill in defaults."""
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    lines = _line_index(text) if text is not None else {}
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{source}:{lines.get('schema_version', '?')}: unsupported schema_version {version!r}")
    cfg = _merge(DEFAULTS, raw, "", lines, source)
    try:
        to_lapo_config(cfg)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return cfg


def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed YAML ({exc})") from exc
    return resolve(raw, str(path), text)


def dump_config(cfg: dict, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg, sort_keys=True), encoding="utf-8")


def _stage(cfg: dict, name: str) -> StageConfig:
    s = cfg[name]
    return StageConfig(
        episodes=s["episodes"],
        steps_per_episode=s["steps_per_episode"],
        rollouts_per_problem=s["rollouts_per_problem"],
        batch_size=s["batch_size"],
        max_generation_length=cfg["env"]["max_generation_length"],
        learning_rate=float(s["learning_rate"]),
        seed=cfg["seed"],
    )


def to_lapo_config(cfg: dict) -> LapoConfig:
    r = cfg["reward"]
    if r["sigma_tokens"] is not None:
        sigma = SigmaMode.fixed(r["sigma_tokens"])
    elif r["sigma_ratio"] is not None:
        sigma = SigmaMode.proportional(float(r["sigma_ratio"]))
    else:
        raise ConfigError("reward: set one of sigma_ratio / sigma_tokens")
    try:
        guidance = GuidanceMode(cfg["guidance"])
        statistic = TargetStatistic(cfg["target_statistic"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    if cfg["eval"]["samples"] < 1:
        raise ConfigError("eval.samples must be >= 1")
    policy = cfg["policy"]
    if policy["init_length"] < 1 or policy["sigma_gen"] <= 0:
        raise ConfigError("policy.init_length must be >= 1 and policy.sigma_gen positive")
    mass = support_mass(PolicyParams(math.log(policy["init_length"]), float(policy["sigma_gen"])),
                        cfg["env"]["max_generation_length"])
    if mass < 0.999:
        raise ConfigError(f"policy: initial length distribution keeps only {mass:.4%} of its mass inside the support")
    return LapoConfig(
        discovery=_stage(cfg, "discovery"),
        internalization=_stage(cfg, "internalization"),
        reward=RewardConfig(float(r["alpha"]), float(r["beta"]), sigma, float(r["distance_scale"])),
        env=EnvModel(**{k: v for k, v in cfg["env"].items()}),
        init_length=float(cfg["policy"]["init_length"]),
        sigma_gen=float(cfg["policy"]["sigma_gen"]),
        guidance=guidance,
        target_statistic=statistic,
        seed=cfg["seed"],
        threads=cfg["threads"],
    )


def training_bank(cfg: dict, base_dir: Path | None = None) -> list[Problem]:
    b = cfg["bank"]
    if b["path"]:
        return load_bank(_relative(b["path"], base_dir))
    return default_bank(b["tiers"], b["per_tier"], b["benchmark_tag"])


def eval_bank(cfg: dict, base_dir: Path | None = None) -> list[Problem]:
    if cfg["eval"]["bank_path"]:
        return load_bank(_relative(cfg["eval"]["bank_path"], base_dir))
    return training_bank(cfg, base_dir)


def _relative(p: str, base_dir: Path | None) -> Path:
    path = Path(p)
    return path if path.is_absolute() or base_dir is None else base_dir / path


@dataclass(frozen=True)
class RunConfig:
    """Resolved config dict together with its typed training view."""

    raw: dict
    lapo: LapoConfig
    base_dir: Path | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        raw = load_config(path)
        return cls(raw, to_lapo_config(raw), Path(path).resolve().parent)

    @classmethod
    def from_dict(cls, raw: dict | None = None) -> RunConfig:
        resolved = resolve(raw)
        return cls(resolved, to_lapo_config(resolved))
