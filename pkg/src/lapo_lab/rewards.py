"""Reward shaping for both training stages and the guidance-form variants.

Every reward is gated on correctness: an incorrect rollout scores exactly 0
regardless of its length.
"""

from __future__ import annotations

import enum
import math

from .stats import percentile
from .types import (
    BudgetMissing,
    ConfigError,
    CorrectLengthSample,
    LengthRange,
    RewardBreakdown,
    RewardConfig,
    Rollout,
    round_half_away,
)


class GuidanceMode(str, enum.Enum):
    EXACT = "exact"
    RANGE = "range"
    IMPLICIT = "implicit"


def compute_range(sample: CorrectLengthSample) -> LengthRange:
    """30th-70th percentile band of the correct lengths, rounded to tokens."""
    return LengthRange(round_half_away(percentile(sample, 30)), round_half_away(percentile(sample, 70)))


def discovery_length_reward(length: int, correct: bool, range_: LengthRange, distance_scale: float = 100.0) -> float:
    if not correct:
        return 0.0
    if range_.lo <= length <= range_.hi:
        return 1.0
    d = min(abs(length - range_.lo), abs(length - range_.hi))
    return max(0.0, 1.0 - d / distance_scale)


def discovery_total_reward(rollout: Rollout, range_: LengthRange, cfg: RewardConfig) -> RewardBreakdown:
    c = 1.0 if rollout.correct else 0.0
    lt = discovery_length_reward(rollout.length, rollout.correct, range_, cfg.distance_scale)
    return RewardBreakdown(c, lt, c + cfg.alpha * lt)


def adherence_reward(length: int, correct: bool, n: int, sigma: float) -> float:
    """Gaussian closeness of ``length`` to the declared budget ``n``."""
    if sigma <= 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    if not correct:
        return 0.0
    return math.exp(-((length - n) ** 2) / (2.0 * sigma * sigma))


def internalization_total_reward(rollout: Rollout, cfg: RewardConfig) -> RewardBreakdown:
    n = rollout.declared_budget
    if n is None:
        raise BudgetMissing(f"rollout for {rollout.problem_id!r} has no declared budget")
    c = 1.0 if rollout.correct else 0.0
    lt = adherence_reward(rollout.length, rollout.correct, n, cfg.sigma_mode.resolve(n))
    return RewardBreakdown(c, lt, c + cfg.beta * lt)


def range_adherence_reward(length: int, correct: bool, range_: LengthRange, sigma: float) -> float:
    # plateau inside the band, Gaussian falloff measured from the nearest bound
    if not correct:
        return 0.0
    if range_.lo <= length <= range_.hi:
        return 1.0
    d = range_.lo - length if length < range_.lo else length - range_.hi
    return adherence_reward(d, True, 0, sigma)


def guidance_variant_reward(
    rollout: Rollout,
    mode: GuidanceMode,
    cfg: RewardConfig,
    n: int | None = None,
    range_: LengthRange | None = None,
) -> RewardBreakdown:
    mode = GuidanceMode(mode)
    if mode is GuidanceMode.EXACT:
        if n is None and rollout.declared_budget is None:
            raise BudgetMissing("exact guidance needs a budget")
        if n is not None and rollout.declared_budget != n:
            rollout = Rollout(rollout.problem_id, rollout.length, rollout.correct, n)
        return internalization_total_reward(rollout, cfg)
    if range_ is None:
        raise ConfigError(f"{mode.value} guidance needs a length range")
    if mode is GuidanceMode.RANGE:
        # sigma scales with the band's midpoint, mirroring the proportional rule
        mid = round_half_away((range_.lo + range_.hi) / 2)
        c = 1.0 if rollout.correct else 0.0
        lt = range_adherence_reward(rollout.length, rollout.correct, range_, cfg.sigma_mode.resolve(mid))
        return RewardBreakdown(c, lt, c + cfg.beta * lt)
    return discovery_total_reward(rollout, range_, cfg)
