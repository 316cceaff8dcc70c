"""Benchmark evaluation and the difficulty-allocation analysis."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import groupby
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import length_map as lm
from .policy_env import EnvModel, PolicyParams, rng_stream, sample_group_arrays
from .types import LabError, Problem


class EmptyBenchmark(LabError, ValueError):
    pass


class InsufficientTiers(LabError, ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkResult:
    pass1: float
    avg_tokens: float
    # (difficulty, mean length) pairs, ascending by difficulty
    tier_lengths: tuple[tuple[float, float], ...]
    tier_pass1: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class EvalReport:
    benchmarks: Mapping[str, BenchmarkResult] = field(default_factory=dict)

    def overall(self) -> BenchmarkResult:
        """Problem-weighted pooling is not needed: benchmarks are reported separately,
        and the overall row is the plain average across benchmarks."""
        rs = list(self.benchmarks.values())
        return BenchmarkResult(
            float(np.mean([r.pass1 for r in rs])),
            float(np.mean([r.avg_tokens for r in rs])),
            (),
        )


def evaluate(
    policy: Mapping[str, PolicyParams],
    env: EnvModel,
    bank: Sequence[Problem],
    k: int,
    budget_map: lm.LengthMap | None = None,
    seed: int = 0,
    tag: str = "eval",
) -> EvalReport:
    """Sample ``k`` rollouts per problem and aggregate pass@1 and mean tokens.

    Rollouts are conditioned on the map's target when ``budget_map`` is given.
    Each problem draws from its own stream keyed by (seed, tag, problem id), so
    the report does not depend on bank order.
    """
    if not bank:
        raise EmptyBenchmark("evaluation bank is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    per_bench: dict[str, list[tuple[float, float, float]]] = defaultdict(list)
    for problem in bank:
        budget = lm.get_target(budget_map, problem.id) if budget_map is not None else None
        rng = rng_stream(seed, tag, problem.id)
        lengths, correct = sample_group_arrays(policy[problem.id], env, problem.difficulty, budget, k, rng)
        per_bench[problem.benchmark_tag].append((problem.difficulty, float(correct.mean()), float(lengths.mean())))

    out = {}
    for tag_name, rows in sorted(per_bench.items()):
        rows.sort(key=lambda r: r[0])
        tiers, tier_acc = [], []
        for d, grp in groupby(rows, key=lambda r: r[0]):
            grp = list(grp)
            tiers.append((d, float(np.mean([g[2] for g in grp]))))
            tier_acc.append((d, float(np.mean([g[1] for g in grp]))))
        out[tag_name] = BenchmarkResult(
            float(np.mean([r[1] for r in rows])),
            float(np.mean([r[2] for r in rows])),
            tuple(tiers),
            tuple(tier_acc),
        )
    return EvalReport(out)


def rank_average(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    ra, rb = rank_average(a), rank_average(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = float(np.sqrt(np.sum(ra * ra) * np.sum(rb * rb)))
    if denom == 0:
        return 0.0
    return float(np.sum(ra * rb) / denom)


@dataclass(frozen=True)
class Allocation:
    tier_lengths: tuple[tuple[float, float], ...]
    spearman_rho: float


def difficulty_allocation(report: EvalReport | BenchmarkResult, benchmark: str | None = None) -> Allocation:
    """Rank correlation between difficulty tier and mean generated length."""
    if isinstance(report, EvalReport):
        if benchmark is None:
            if len(report.benchmarks) != 1:
                raise ValueError("name the benchmark to analyse")
            benchmark = next(iter(report.benchmarks))
        result = report.benchmarks[benchmark]
    else:
        result = report
    tiers = result.tier_lengths
    if len(tiers) < 2:
        raise InsufficientTiers(f"need at least two difficulty tiers, got {len(tiers)}")
    rho = spearman(range(len(tiers)), [m for _, m in tiers])
    return Allocation(tiers, rho)


def write_eval_csv(reports: Mapping[str, EvalReport], path: str | Path) -> None:
    """One row per (arm, benchmark) with the usual Pass@1 / #Tok columns."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arm", "benchmark", "Pass@1", "#Tok"])
        for arm, report in reports.items():
            for bench, r in report.benchmarks.items():
                writer.writerow([arm, bench, format_pass1(r.pass1), format_tokens(r.avg_tokens)])


def format_pass1(p: float) -> str:
    return f"{100.0 * p:.1f}"


def format_tokens(t: float) -> str:
    return f"{t:.0f}"


def write_tier_tsv(alloc: Allocation, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tier\tmean_length\n")
        for d, m in alloc.tier_lengths:
            fh.write(f"{d:g}\t{m:.2f}\n")
