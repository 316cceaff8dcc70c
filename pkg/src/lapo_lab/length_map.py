"""Persistent problem -> target-length table and its stage-specific update rules."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .stats import TargetStatistic, select_target
from .types import MAX_GENERATION_LENGTH, ConfigError, CorrectLengthSample


@dataclass(frozen=True)
class MapEntry:
    target: int
    ever_solved: bool


@dataclass(frozen=True)
class LengthMap:
    entries: Mapping[str, MapEntry] = field(default_factory=dict)
    default_target: int = MAX_GENERATION_LENGTH

    def __post_init__(self) -> None:
        if self.default_target < 1:
            raise ConfigError("default_target must be >= 1")
        for pid, e in self.entries.items():
            if not 1 <= e.target <= self.default_target:
                raise ConfigError(f"entries.{pid}.target: {e.target} outside [1, {self.default_target}]")
            if not e.ever_solved and e.target != self.default_target:
                raise ConfigError(f"entries.{pid}: unsolved entry must hold the default target")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LengthMap):
            return NotImplemented
        return self.default_target == other.default_target and dict(self.entries) == dict(other.entries)

    def _with(self, problem_id: str, entry: MapEntry) -> LengthMap:
        # only the touched entry needs checking; skip re-validating the whole table
        if not 1 <= entry.target <= self.default_target:
            raise ConfigError(f"entries.{problem_id}.target: {entry.target} outside [1, {self.default_target}]")
        entries = dict(self.entries)
        entries[problem_id] = entry
        out = object.__new__(LengthMap)
        object.__setattr__(out, "entries", entries)
        object.__setattr__(out, "default_target", self.default_target)
        return out

    def targets(self) -> dict[str, int]:
        return {pid: e.target for pid, e in self.entries.items()}


def get_target(m: LengthMap, problem_id: str) -> int:
    entry = m.entries.get(problem_id)
    return entry.target if entry is not None else m.default_target


def update_discovery(
    m: LengthMap, problem_id: str, sample: CorrectLengthSample, stat: TargetStatistic = TargetStatistic.MEDIAN
) -> LengthMap:
    """Overwrite with the current statistic; unsolved groups fall back to the default."""
    old = m.entries.get(problem_id)
    if sample:
        target = min(select_target(sample, stat), m.default_target)
        return m._with(problem_id, MapEntry(target, True))
    solved = old.ever_solved if old is not None else False
    return m._with(problem_id, MapEntry(m.default_target, solved))


def update_internalization(
    m: LengthMap, problem_id: str, sample: CorrectLengthSample, stat: TargetStatistic = TargetStatistic.MEDIAN
) -> LengthMap:
    """Set on first solve, otherwise only ever shrink; empty samples leave the entry alone."""
    if not sample:
        return m
    new = min(select_target(sample, stat), m.default_target)
    old = m.entries.get(problem_id)
    if old is not None and old.ever_solved:
        new = min(old.target, new)
    return m._with(problem_id, MapEntry(new, True))


def to_json(m: LengthMap) -> dict:
    return {
        "default_target": m.default_target,
        "entries": {
            pid: {"target": e.target, "ever_solved": e.ever_solved} for pid, e in sorted(m.entries.items())
        },
    }


def from_json(raw: object, source: str = "<map>") -> LengthMap:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: expected a JSON object at top level")
    try:
        default = raw["default_target"]
        entries_raw = raw["entries"]
    except KeyError as exc:
        raise ConfigError(f"{source}: missing key {exc.args[0]}") from exc
    if not isinstance(default, int) or isinstance(default, bool):
        raise ConfigError(f"{source}: default_target must be an integer")
    if not isinstance(entries_raw, dict):
        raise ConfigError(f"{source}: entries must be an object")
    entries = {}
    for pid, e in entries_raw.items():
        try:
            target, solved = e["target"], e["ever_solved"]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{source}: entries.{pid}: missing or invalid field ({exc})") from exc
        if not isinstance(target, int) or isinstance(target, bool) or not isinstance(solved, bool):
            raise ConfigError(f"{source}: entries.{pid}: target must be int, ever_solved bool")
        entries[pid] = MapEntry(target, solved)
    try:
        return LengthMap(entries, default)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def save(m: LengthMap, path: str | Path) -> None:
    Path(path).write_text(json.dumps(to_json(m), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load(path: str | Path) -> LengthMap:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise ConfigError(f"{path}: empty length-map file")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    return from_json(raw, str(path))
