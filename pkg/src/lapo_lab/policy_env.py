"""Synthetic stand-in for the reasoning model and its grader.

The policy draws log-lengths from a normal distribution whose location can be
pulled toward a declared budget; the environment marks a response correct
with a probability that saturates in length, more slowly for harder problems.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.stats import norm

from .types import MAX_GENERATION_LENGTH, ConfigError, Problem, Rollout, RolloutGroup

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PolicyParams:
    mu: float
    sigma_gen: float = 0.25
    w: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma_gen <= 0:
            raise ConfigError(f"sigma_gen must be positive, got {self.sigma_gen}")
        if not 0.0 <= self.w <= 1.0:
            raise ConfigError(f"w must lie in [0, 1], got {self.w}")

    def location(self, budget: int | None) -> float:
        if budget is None:
            return self.mu
        return (1.0 - self.w) * self.mu + self.w * math.log(budget)


Policy = Mapping[str, PolicyParams]


@dataclass(frozen=True)
class EnvModel:
    p_max_base: float = 0.98
    p_max_slope: float = 0.12
    tau_per_difficulty: float = 300.0
    max_generation_length: int = MAX_GENERATION_LENGTH

    def __post_init__(self) -> None:
        if self.p_max_slope < 0 or self.tau_per_difficulty <= 0:
            raise ConfigError("p_max must be non-increasing and tau positive in difficulty")
        if not 0.0 <= self.p_max_base <= 1.0:
            raise ConfigError("p_max_base must lie in [0, 1]")

    def p_max(self, difficulty: float) -> float:
        return min(1.0, max(0.0, self.p_max_base - self.p_max_slope * (difficulty - 1.0)))

    def tau(self, difficulty: float) -> float:
        return self.tau_per_difficulty * difficulty


def prob_correct(env: EnvModel, difficulty: float, length: float | np.ndarray) -> float | np.ndarray:
    return env.p_max(difficulty) * -np.expm1(-np.asarray(length, dtype=float) / env.tau(difficulty))


def rng_stream(seed: int, *keys: int | str) -> np.random.Generator:
    """Independent generator for one (seed, keys...) cell; stable across worker counts."""
    spawn = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn)))


def _round_clamp(x: np.ndarray, max_len: int) -> np.ndarray:
    # lengths are positive, so floor(x + 0.5) rounds ties away from zero
    return np.clip(np.floor(x + 0.5), 1, max_len).astype(np.int64)


def sample_lengths(
    params: PolicyParams, budget: int | None, size: int, rng: np.random.Generator,
    max_generation_length: int = MAX_GENERATION_LENGTH,
) -> np.ndarray:
    z = rng.normal(params.location(budget), params.sigma_gen, size=size)
    return _round_clamp(np.exp(z), max_generation_length)


def sample_length(
    params: PolicyParams, budget: int | None, rng: np.random.Generator,
    max_generation_length: int = MAX_GENERATION_LENGTH,
) -> int:
    return int(sample_lengths(params, budget, 1, rng, max_generation_length)[0])


def sample_group_arrays(
    params: PolicyParams, env: EnvModel, difficulty: float, budget: int | None, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Lengths and correctness flags for ``n`` independent rollouts."""
    lengths = sample_lengths(params, budget, n, rng, env.max_generation_length)
    correct = rng.random(n) < prob_correct(env, difficulty, lengths)
    return lengths, correct


def rollout_group(
    params: PolicyParams, env: EnvModel, problem: Problem, budget: int | None, n: int, rng: np.random.Generator
) -> RolloutGroup:
    if n < 1:
        raise ConfigError("rollout group size must be >= 1")
    lengths, correct = sample_group_arrays(params, env, problem.difficulty, budget, n, rng)
    return RolloutGroup(
        problem.id,
        tuple(Rollout(problem.id, int(L), bool(c), budget) for L, c in zip(lengths, correct)),
    )


def log_density_length(params: PolicyParams, budget: int | None, length: float | np.ndarray) -> float | np.ndarray:
    """Log-normal log-density of ``length``; the clamp to the support is ignored."""
    log_len = np.log(np.asarray(length, dtype=float))
    s = params.sigma_gen
    zs = (log_len - params.location(budget)) / s
    return -log_len - math.log(s) - LOG_SQRT_2PI - 0.5 * zs * zs


def score_mu(params: PolicyParams, budget: int | None, length: float | np.ndarray) -> np.ndarray:
    """d/d mu of the log-density."""
    weight = 1.0 - params.w if budget is not None else 1.0
    resid = np.log(np.asarray(length, dtype=float)) - params.location(budget)
    return resid * weight / params.sigma_gen**2


def score_w(params: PolicyParams, budget: int | None, length: float | np.ndarray) -> np.ndarray:
    """d/d w of the log-density (zero without a budget)."""
    log_len = np.log(np.asarray(length, dtype=float))
    if budget is None:
        return np.zeros_like(log_len)
    resid = log_len - params.location(budget)
    return resid * (math.log(budget) - params.mu) / params.sigma_gen**2


def support_mass(params: PolicyParams, max_generation_length: int = MAX_GENERATION_LENGTH) -> float:
    """Probability that an unconditioned draw lands inside [1, max] before clamping."""
    hi = norm.cdf(math.log(max_generation_length + 0.5), params.mu, params.sigma_gen)
    lo = norm.cdf(math.log(0.5), params.mu, params.sigma_gen)
    return float(hi - lo)


def initial_policy(
    problems: list[Problem], init_length: float, sigma_gen: float = 0.25,
    max_generation_length: int = MAX_GENERATION_LENGTH, min_support_mass: float = 0.999,
) -> dict[str, PolicyParams]:
    params = PolicyParams(math.log(init_length), sigma_gen, 0.0)
    mass = support_mass(params, max_generation_length)
    if mass < min_support_mass:
        raise ConfigError(
            f"initial policy puts only {mass:.4%} of its mass inside [1, {max_generation_length}]; "
            f"lower init_length or sigma_gen"
        )
    return {p.id: params for p in problems}


def save_policy(policy: Policy, path: str | Path) -> None:
    blob = {pid: asdict(p) for pid, p in sorted(policy.items())}
    Path(path).write_text(json.dumps(blob, indent=2) + "\n", encoding="utf-8")


def load_policy(path: str | Path) -> dict[str, PolicyParams]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object keyed by problem id")
    out = {}
    for pid, p in raw.items():
        try:
            out[pid] = PolicyParams(float(p["mu"]), float(p["sigma_gen"]), float(p["w"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: {pid}: missing or invalid field ({exc})") from exc
    return out


def with_updates(policy: Policy, updates: Mapping[str, PolicyParams]) -> dict[str, PolicyParams]:
    merged = dict(policy)
    merged.update(updates)
    return merged

