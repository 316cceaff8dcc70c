"""Two-stage training loop: Discovery builds the length map, Internalization
conditions generation on it.

Within one training step every problem in the batch is processed
independently (sample, reward, advantages, parameter step); map updates are
staged and committed in batch order once the step is done, so results do not
depend on the worker count.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Sequence, TextIO

import numpy as np

from . import length_map as lm
from .grpo import apply_update_arrays, group_advantages
from .policy_env import EnvModel, PolicyParams, initial_policy, rng_stream, sample_group_arrays
from .rewards import (
    GuidanceMode,
    adherence_reward,
    compute_range,
    discovery_length_reward,
    range_adherence_reward,
)
from .stats import TargetStatistic
from .types import (
    ConfigError,
    CorrectLengthSample,
    LengthRange,
    Problem,
    RewardConfig,
    Stage,
    StageConfig,
    round_half_away,
)

log = logging.getLogger(__name__)

PROMPT_TEMPLATE = "<think> I will answer the question with {n} tokens."
RANGE_PROMPT_TEMPLATE = "<think> I will answer the question with {lo} to {hi} tokens."


def render_budget_prefix(n: int) -> str:
    if n < 1:
        raise ConfigError(f"budget must be >= 1, got {n}")
    return PROMPT_TEMPLATE.format(n=int(n))


def render_range_prefix(r: LengthRange) -> str:
    return RANGE_PROMPT_TEMPLATE.format(lo=r.lo, hi=r.hi)


@dataclass(frozen=True)
class LapoConfig:
    discovery: StageConfig = field(default_factory=StageConfig)
    internalization: StageConfig = field(default_factory=StageConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    env: EnvModel = field(default_factory=EnvModel)
    init_length: float = 1800.0
    sigma_gen: float = 0.25
    guidance: GuidanceMode = GuidanceMode.EXACT
    target_statistic: TargetStatistic = TargetStatistic.MEDIAN
    seed: int = 7
    threads: int = 1

    def stage(self, stage: Stage) -> StageConfig:
        return self.discovery if stage is Stage.DISCOVERY else self.internalization


@dataclass(frozen=True)
class StepMetrics:
    step: int
    stage: str
    mean_reward: float
    mean_length: float
    accuracy: float


@dataclass
class RunState:
    step: int
    stage: Stage
    params: dict[str, PolicyParams]
    map: lm.LengthMap
    # last known percentile band per problem; drives range-guidance prompts
    ranges: dict[str, LengthRange] = field(default_factory=dict)
    metrics: list[StepMetrics] = field(default_factory=list)

    def enter_internalization(self) -> None:
        if self.stage is not Stage.DISCOVERY:
            raise RuntimeError("stage can only advance once, from discovery to internalization")
        self.stage = Stage.INTERNALIZATION


@dataclass(frozen=True)
class _ProblemResult:
    problem_id: str
    params: PolicyParams
    sample: CorrectLengthSample
    new_range: LengthRange | None
    record: dict


def initial_state(cfg: LapoConfig, bank: Sequence[Problem]) -> RunState:
    params = initial_policy(list(bank), cfg.init_length, cfg.sigma_gen, cfg.env.max_generation_length)
    return RunState(0, Stage.DISCOVERY, params, lm.LengthMap({}, cfg.env.max_generation_length))


def iter_batches(bank: Sequence[Problem], stage_cfg: StageConfig, seed: int, stage: Stage) -> Iterator[list[Problem]]:
    """Endless stream of batches: each pass is a fresh shuffle covering every problem once.

    The final batch of a pass may be short; batches never straddle passes.
    """
    pass_index = 0
    while True:
        order = rng_stream(seed, "batches", stage.value, pass_index).permutation(len(bank))
        for start in range(0, len(order), stage_cfg.batch_size):
            yield [bank[i] for i in order[start:start + stage_cfg.batch_size]]
        pass_index += 1


def _float_list(xs: np.ndarray) -> list[float]:
    return [float(x) for x in xs]


def _discovery_problem(
    state: RunState, problem: Problem, cfg: LapoConfig, step: int
) -> _ProblemResult:
    scfg = cfg.discovery
    params = state.params[problem.id]
    rng = rng_stream(cfg.seed, Stage.DISCOVERY.value, step, problem.id)
    lengths, correct = sample_group_arrays(params, cfg.env, problem.difficulty, None, scfg.rollouts_per_problem, rng)
    sample = CorrectLengthSample(tuple(int(L) for L, c in zip(lengths, correct) if c))
    rng_band = compute_range(sample) if sample else None
    rewards = np.array([
        (1.0 + cfg.reward.alpha * discovery_length_reward(int(L), True, rng_band, cfg.reward.distance_scale)) if c else 0.0
        for L, c in zip(lengths, correct)
    ])
    adv = group_advantages(rewards)
    new_params = apply_update_arrays(params, lengths.astype(float), None, adv, scfg.learning_rate, Stage.DISCOVERY)
    record = {
        "step": step,
        "stage": Stage.DISCOVERY.value,
        "problem_id": problem.id,
        "n_or_null": None,
        "prompt": None,
        "reward_kind": "discovery",
        "lengths": [int(x) for x in lengths],
        "corrects": [bool(x) for x in correct],
        "rewards": _float_list(rewards),
        "advantages": _float_list(adv),
    }
    return _ProblemResult(problem.id, new_params, sample, rng_band, record)


def _internalization_problem(
    state: RunState, problem: Problem, cfg: LapoConfig, step: int
) -> _ProblemResult:
    scfg = cfg.internalization
    rcfg = cfg.reward
    params = state.params[problem.id]
    rng = rng_stream(cfg.seed, Stage.INTERNALIZATION.value, step, problem.id)
    n = lm.get_target(state.map, problem.id)
    mode = cfg.guidance
    if mode is GuidanceMode.EXACT:
        budget, prompt, kind = n, render_budget_prefix(n), "adherence"
    elif mode is GuidanceMode.RANGE:
        band = state.ranges.get(problem.id, LengthRange(n, n))
        budget, prompt, kind = range_midpoint(band), render_range_prefix(band), "range_adherence"
    else:
        budget, prompt, kind = None, None, "discovery"
    lengths, correct = sample_group_arrays(params, cfg.env, problem.difficulty, budget, scfg.rollouts_per_problem, rng)
    sample = CorrectLengthSample(tuple(int(L) for L, c in zip(lengths, correct) if c))
    group_band = compute_range(sample) if sample else None

    if mode is GuidanceMode.EXACT:
        sigma = rcfg.sigma_mode.resolve(n)
        terms = [adherence_reward(int(L), bool(c), n, sigma) for L, c in zip(lengths, correct)]
        coef = rcfg.beta
    elif mode is GuidanceMode.RANGE:
        sigma = rcfg.sigma_mode.resolve(budget)
        terms = [range_adherence_reward(int(L), bool(c), band, sigma) for L, c in zip(lengths, correct)]
        coef = rcfg.beta
    else:
        terms = [discovery_length_reward(int(L), bool(c), group_band, rcfg.distance_scale) if c else 0.0
                 for L, c in zip(lengths, correct)]
        coef = rcfg.alpha
    rewards = np.array([(1.0 + coef * t) if c else 0.0 for t, c in zip(terms, correct)])
    adv = group_advantages(rewards)
    new_params = apply_update_arrays(params, lengths.astype(float), budget, adv, scfg.learning_rate, Stage.INTERNALIZATION)
    record = {
        "step": step,
        "stage": Stage.INTERNALIZATION.value,
        "problem_id": problem.id,
        "n_or_null": budget,
        "prompt": prompt,
        "reward_kind": kind,
        "lengths": [int(x) for x in lengths],
        "corrects": [bool(x) for x in correct],
        "rewards": _float_list(rewards),
        "advantages": _float_list(adv),
    }
    return _ProblemResult(problem.id, new_params, sample, group_band, record)


def range_midpoint(band: LengthRange) -> int:
    return max(1, round_half_away(math.sqrt(band.lo * band.hi)))


def _commit(state: RunState, results: list[_ProblemResult], cfg: LapoConfig, sink: TextIO | None) -> None:
    stage = state.stage
    for res in results:
        state.params[res.problem_id] = res.params
        if stage is Stage.DISCOVERY:
            state.map = lm.update_discovery(state.map, res.problem_id, res.sample, cfg.target_statistic)
            if res.new_range is not None:
                state.ranges[res.problem_id] = res.new_range
        else:
            state.map = lm.update_internalization(state.map, res.problem_id, res.sample, cfg.target_statistic)
            if res.new_range is not None:
                old = state.ranges.get(res.problem_id)
                band = res.new_range
                if old is not None:
                    lo = min(old.lo, band.lo)
                    band = LengthRange(lo, max(lo, min(old.hi, band.hi)))
                state.ranges[res.problem_id] = band
        if sink is not None:
            rec = dict(res.record)
            rec["map_target_after"] = lm.get_target(state.map, res.problem_id)
            sink.write(json.dumps(rec) + "\n")
    lengths = [x for r in results for x in r.record["lengths"]]
    rewards = [x for r in results for x in r.record["rewards"]]
    corrects = [x for r in results for x in r.record["corrects"]]
    state.metrics.append(StepMetrics(
        state.step, stage.value, float(np.mean(rewards)), float(np.mean(lengths)), float(np.mean(corrects))
    ))
    state.step += 1


def _run_step(
    state: RunState, batch: Sequence[Problem], cfg: LapoConfig, sink: TextIO | None,
    worker: Callable[[RunState, Problem, LapoConfig, int], _ProblemResult], pool: ThreadPoolExecutor | None,
) -> RunState:
    step = state.step
    if pool is None:
        results = [worker(state, p, cfg, step) for p in batch]
    else:
        results = list(pool.map(lambda p: worker(state, p, cfg, step), batch))
    _commit(state, results, cfg, sink)
    return state


def discovery_step(state: RunState, batch: Sequence[Problem], cfg: LapoConfig,
                   sink: TextIO | None = None, pool: ThreadPoolExecutor | None = None) -> RunState:
    if state.stage is not Stage.DISCOVERY:
        raise RuntimeError("discovery_step called outside the discovery stage")
    return _run_step(state, batch, cfg, sink, _discovery_problem, pool)


def internalization_step(state: RunState, batch: Sequence[Problem], cfg: LapoConfig,
                         sink: TextIO | None = None, pool: ThreadPoolExecutor | None = None) -> RunState:
    if state.stage is not Stage.INTERNALIZATION:
        raise RuntimeError("internalization_step called outside the internalization stage")
    return _run_step(state, batch, cfg, sink, _internalization_problem, pool)


def run_stage(state: RunState, bank: Sequence[Problem], cfg: LapoConfig, sink: TextIO | None = None) -> RunState:
    """Run every episode of the state's current stage."""
    scfg = cfg.stage(state.stage)
    total = scfg.episodes * scfg.steps_per_episode
    step_fn = discovery_step if state.stage is Stage.DISCOVERY else internalization_step
    batches = iter_batches(bank, scfg, cfg.seed, state.stage)
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for i in range(total):
            step_fn(state, next(batches), cfg, sink, pool)
            if (i + 1) % scfg.steps_per_episode == 0:
                m = state.metrics[-1]
                log.info("%s episode %d done: reward %.3f, length %.1f, acc %.3f",
                         state.stage.value, (i + 1) // scfg.steps_per_episode, m.mean_reward, m.mean_length, m.accuracy)
    finally:
        if pool is not None:
            pool.shutdown()
    return state


def run_discovery(cfg: LapoConfig, bank: Sequence[Problem], sink: TextIO | None = None) -> RunState:
    return run_stage(initial_state(cfg, bank), bank, cfg, sink)


def run_internalization(discovered: RunState, bank: Sequence[Problem], cfg: LapoConfig,
                        sink: TextIO | None = None) -> RunState:
    """Continue from a Discovery checkpoint; the checkpoint itself is left untouched."""
    state = RunState(
        discovered.step, discovered.stage, dict(discovered.params), discovered.map,
        dict(discovered.ranges), list(discovered.metrics),
    )
    state.enter_internalization()
    return run_stage(state, bank, cfg, sink)


def run_lapo(cfg: LapoConfig, bank: Sequence[Problem], sink: TextIO | None = None) -> tuple[RunState, RunState]:
    """Full two-stage run; returns the Discovery checkpoint and the final state."""
    if not bank:
        raise ConfigError("cannot train on an empty problem bank")
    discovered = run_discovery(cfg, bank, sink)
    final = run_internalization(discovered, bank, cfg, sink)
    return discovered, final


def conditioning_map(state: RunState, cfg: LapoConfig) -> lm.LengthMap | None:
    """The budgets a trained policy declares at inference, or None for unconditioned runs."""
    if state.stage is Stage.DISCOVERY or cfg.internalization.episodes == 0 or cfg.guidance is GuidanceMode.IMPLICIT:
        return None
    if cfg.guidance is GuidanceMode.RANGE:
        entries = {pid: lm.MapEntry(range_midpoint(b), True) for pid, b in state.ranges.items()}
        return lm.LengthMap(entries, state.map.default_target)
    return state.map


def with_overrides(cfg: LapoConfig, **kw) -> LapoConfig:
    return replace(cfg, **kw)
