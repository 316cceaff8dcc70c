"""Group-relative advantages and the score-function policy step shared by both stages."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .policy_env import PolicyParams, score_mu, score_w
from .types import RolloutGroup, Stage


def group_advantages(rewards: Sequence[float], eps: float = 1e-8) -> np.ndarray:
    """(r - mean) / (population std + eps); degenerate groups get zeros."""
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        raise ValueError("cannot normalise an empty reward group")
    centred = r - r.mean()
    std = float(np.sqrt(np.mean(centred * centred)))
    # an exact-zero guard keeps float noise from producing tiny non-zero advantages
    if r.size == 1 or np.all(r == r[0]):
        return np.zeros_like(r)
    return centred / (std + eps)


def apply_update_arrays(
    params: PolicyParams,
    lengths: np.ndarray,
    budget: int | None,
    advantages: np.ndarray,
    lr: float,
    stage: Stage,
) -> PolicyParams:
    if lr == 0 or not np.any(advantages):
        return params
    mu = params.mu + lr * float(np.mean(advantages * score_mu(params, budget, lengths)))
    w = params.w
    if stage is Stage.INTERNALIZATION and budget is not None:
        w = params.w + lr * float(np.mean(advantages * score_w(params, budget, lengths)))
        w = min(1.0, max(0.0, w))
    return PolicyParams(mu, params.sigma_gen, w)


def apply_update(
    params: PolicyParams, group: RolloutGroup, advantages: Sequence[float], lr: float, stage: Stage
) -> PolicyParams:
    """One score-function step: theta += lr * mean_i(A_i * grad log p(rollout_i)).

    Discovery moves only ``mu``; Internalization also moves ``w`` (clamped to
    [0, 1]). ``sigma_gen`` never changes.
    """
    adv = np.asarray(advantages, dtype=float)
    if adv.shape != (len(group),):
        raise ValueError(f"{adv.size} advantages for a group of {len(group)}")
    budgets = {r.declared_budget for r in group.rollouts}
    if len(budgets) != 1:
        raise ValueError("all rollouts in a group must share one declared budget")
    lengths = np.array(group.lengths, dtype=float)
    return apply_update_arrays(params, lengths, budgets.pop(), adv, lr, Stage(stage))
