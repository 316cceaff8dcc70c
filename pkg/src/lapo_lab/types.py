"""Domain value objects shared across the lab, plus their file formats.

Problem banks are JSON arrays of ``{id, difficulty, benchmark_tag}``; rollout
logs are JSON-lines with a header line carrying the config hash and seed.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

MAX_GENERATION_LENGTH = 4096


class LabError(Exception):
    """Base class for errors raised by the lab."""


class ConfigError(LabError, ValueError):
    pass


class EmptySample(LabError, ValueError):
    """Raised when a statistic is requested over zero correct lengths."""


class BudgetMissing(LabError, ValueError):
    pass


class Stage(str, enum.Enum):
    DISCOVERY = "discovery"
    INTERNALIZATION = "internalization"


@dataclass(frozen=True)
class Problem:
    id: str
    difficulty: float
    benchmark_tag: str = "synthetic"

    def __post_init__(self) -> None:
        if not 1.0 <= self.difficulty <= 5.0:
            raise ConfigError(f"problem {self.id!r}: difficulty {self.difficulty} outside [1, 5]")


@dataclass(frozen=True)
class Rollout:
    problem_id: str
    length: int
    correct: bool
    declared_budget: int | None = None

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ConfigError(f"rollout length must be >= 1, got {self.length}")
        if self.declared_budget is not None and self.declared_budget < 1:
            raise ConfigError(f"declared budget must be >= 1, got {self.declared_budget}")


@dataclass(frozen=True)
class RolloutGroup:
    problem_id: str
    rollouts: tuple[Rollout, ...]

    def __post_init__(self) -> None:
        if not self.rollouts:
            raise ConfigError("a rollout group needs at least one rollout")
        if any(r.problem_id != self.problem_id for r in self.rollouts):
            raise ConfigError(f"group {self.problem_id!r} holds rollouts for another problem")

    def __len__(self) -> int:
        return len(self.rollouts)

    @property
    def lengths(self) -> list[int]:
        return [r.length for r in self.rollouts]

    @property
    def corrects(self) -> list[bool]:
        return [r.correct for r in self.rollouts]

    def correct_lengths(self) -> CorrectLengthSample:
        """Lengths of the rollouts that reached the right answer."""
        return CorrectLengthSample(tuple(r.length for r in self.rollouts if r.correct))


@dataclass(frozen=True)
class CorrectLengthSample:
    """Multiset of correct-response lengths for one problem (no dedup)."""

    lengths: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.lengths)

    def __bool__(self) -> bool:
        return bool(self.lengths)


@dataclass(frozen=True)
class LengthRange:
    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo < 1 or self.lo > self.hi:
            raise ConfigError(f"invalid length range [{self.lo}, {self.hi}]")

    def __contains__(self, length: object) -> bool:
        return isinstance(length, (int, float)) and self.lo <= length <= self.hi


@dataclass(frozen=True)
class SigmaMode:
    """Width of the adherence Gaussian: ``ratio * n`` tokens, or a fixed count."""

    ratio: float | None = 0.1
    tokens: int | None = None

    def __post_init__(self) -> None:
        if (self.ratio is None) == (self.tokens is None):
            raise ConfigError("sigma mode needs exactly one of ratio / tokens")
        if self.ratio is not None and self.ratio <= 0:
            raise ConfigError(f"sigma ratio must be positive, got {self.ratio}")
        if self.tokens is not None and self.tokens < 1:
            raise ConfigError(f"fixed sigma must be a positive token count, got {self.tokens}")

    @classmethod
    def proportional(cls, ratio: float = 0.1) -> SigmaMode:
        return cls(ratio=ratio, tokens=None)

    @classmethod
    def fixed(cls, tokens: int) -> SigmaMode:
        return cls(ratio=None, tokens=tokens)

    def resolve(self, n: int) -> float:
        if self.tokens is not None:
            return float(self.tokens)
        return float(max(1, round_half_away(self.ratio * n)))


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 0.7
    beta: float = 0.8
    sigma_mode: SigmaMode = field(default_factory=SigmaMode)
    distance_scale: float = 100.0

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be non-negative")
        if self.distance_scale <= 0:
            raise ConfigError("distance_scale must be positive")


@dataclass(frozen=True)
class RewardBreakdown:
    correctness_term: float
    length_term: float
    total: float


@dataclass(frozen=True)
class StageConfig:
    episodes: int = 3
    steps_per_episode: int = 80
    rollouts_per_problem: int = 8
    batch_size: int = 128
    max_generation_length: int = MAX_GENERATION_LENGTH
    learning_rate: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("steps_per_episode", "rollouts_per_problem", "batch_size", "max_generation_length"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        # zero episodes is allowed so a stage can be skipped entirely
        if self.episodes < 0:
            raise ConfigError("episodes must be >= 0")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")


def round_half_away(x: float) -> int:
    """Nearest integer, ties away from zero (Python's round() is banker's)."""
    if x < 0:
        return -round_half_away(-x)
    whole = math.floor(x)
    return whole + 1 if x - whole >= 0.5 else whole


# -- problem banks -----------------------------------------------------------


def save_bank(problems: Sequence[Problem], path: str | Path) -> None:
    Path(path).write_text(json.dumps([asdict(p) for p in problems], indent=2) + "\n", encoding="utf-8")


def load_bank(path: str | Path) -> list[Problem]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(raw, list):
        raise ConfigError(f"{path}: problem bank must be a JSON array")
    problems = []
    for i, item in enumerate(raw):
        try:
            problems.append(Problem(str(item["id"]), float(item["difficulty"]), str(item.get("benchmark_tag", "synthetic"))))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: [{i}] missing or invalid field ({exc})") from exc
    ids = [p.id for p in problems]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"{path}: duplicate problem ids")
    return problems


def default_bank(tiers: int = 5, per_tier: int = 40, benchmark_tag: str = "synthetic") -> list[Problem]:
    """Evenly tiered synthetic bank: difficulties 1..tiers, ``per_tier`` problems each."""
    step = 4.0 / (tiers - 1) if tiers > 1 else 0.0
    return [
        Problem(f"{benchmark_tag}-t{t + 1}-{i:03d}", 1.0 + t * step, benchmark_tag)
        for t in range(tiers)
        for i in range(per_tier)
    ]


# -- rollout logs ------------------------------------------------------------


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_rollout_log(path: str | Path, rollouts: Iterable[Rollout], config: dict, seed: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"header": True, "config_hash": config_hash(config), "seed": seed}) + "\n")
        for r in rollouts:
            fh.write(json.dumps(asdict(r)) + "\n")


def read_rollout_log(path: str | Path) -> tuple[dict, list[Rollout]]:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise ConfigError(f"{path}: empty rollout log")
    header = json.loads(lines[0])
    if not header.get("header"):
        raise ConfigError(f"{path}: first line must be the run header")
    rollouts = []
    for lineno, line in enumerate(lines[1:], start=2):
        rec = json.loads(line)
        try:
            rollouts.append(Rollout(rec["problem_id"], int(rec["length"]), bool(rec["correct"]), rec.get("declared_budget")))
        except KeyError as exc:
            raise ConfigError(f"{path}:{lineno}: missing field {exc}") from exc
    return header, rollouts
