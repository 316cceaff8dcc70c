from __future__ import annotations

import math
from fractions import Fraction

import pytest

from lapo_lab.pipeline import LapoConfig
from lapo_lab.types import StageConfig, default_bank


def brute_percentile(values, p):
    """Exact-arithmetic reference: walk the sorted list to rank (n-1)p/100."""
    xs = sorted(Fraction(v) for v in values)
    rank = Fraction(len(xs) - 1) * Fraction(p) / 100
    below = int(rank)  # floor for non-negative rationals
    if below == len(xs) - 1:
        return float(xs[below])
    frac = rank - below
    return float(xs[below] * (1 - frac) + xs[below + 1] * frac)


def ties_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@pytest.fixture
def small_bank():
    return default_bank(tiers=5, per_tier=4)


@pytest.fixture
def small_cfg():
    stage = StageConfig(episodes=1, steps_per_episode=6, batch_size=8)
    return LapoConfig(discovery=stage, internalization=stage, seed=3)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts as one line per criterion."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                verdict = "PASS" if rep.passed else "FAIL"
                lines.append((props["criterion"], f"criterion {props['criterion']:>2}: {verdict}  {props.get('detail', '')}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
