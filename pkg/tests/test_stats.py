from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lapo_lab.rewards import compute_range
from lapo_lab.stats import TargetStatistic, percentile, select_target
from lapo_lab.types import CorrectLengthSample, EmptySample

from conftest import brute_percentile, ties_away

lengths = st.lists(st.integers(1, 4096), min_size=1, max_size=20)


@pytest.mark.parametrize(
    "sample, p, expected",
    [
        ([150], 30, 150.0),
        ([100, 200, 300, 400, 500], 50, 300.0),
        ([100, 200, 300, 400, 500], 30, 220.0),
        ([100, 200, 300, 400, 500], 70, 380.0),
    ],
)
def test_percentile_examples(sample, p, expected):
    assert brute_percentile(sample, p) == pytest.approx(expected, abs=1e-12)
    assert percentile(CorrectLengthSample(tuple(sample)), p) == pytest.approx(expected, abs=1e-12)


def test_percentile_matches_numpy_linear():
    rng = random.Random(11)
    for _ in range(200):
        xs = [rng.randint(1, 4096) for _ in range(rng.randint(1, 20))]
        p = rng.uniform(0, 100)
        assert percentile(xs, p) == pytest.approx(np.percentile(xs, p, method="linear"), abs=1e-9)


def test_percentile_oracle_1000_multisets():
    rng = random.Random(2024)
    for _ in range(1000):
        xs = [rng.randint(1, 4096) for _ in range(rng.randint(1, 20))]
        p = rng.choice([0, 30, 50, 70, 100, rng.uniform(0, 100)])
        assert abs(percentile(xs, p) - brute_percentile(xs, p)) <= 1e-9


def test_empty_sample_raises():
    with pytest.raises(EmptySample):
        percentile(CorrectLengthSample(()), 50)
    with pytest.raises(EmptySample):
        select_target(CorrectLengthSample(()), TargetStatistic.MEDIAN)


def test_rank_out_of_range():
    with pytest.raises(ValueError):
        percentile([1, 2], 101)


@pytest.mark.parametrize(
    "stat, expected",
    [(TargetStatistic.MEDIAN, 200), (TargetStatistic.MEAN, 300), (TargetStatistic.MINIMUM, 100)],
)
def test_select_target_examples(stat, expected):
    assert select_target(CorrectLengthSample((100, 200, 600)), stat) == expected


def test_select_target_rounds_ties_away():
    assert select_target([100, 201], TargetStatistic.MEDIAN) == 151  # 150.5
    assert select_target([1, 2], TargetStatistic.MEAN) == 2  # 1.5


@given(lengths, st.floats(0, 100), st.floats(0, 100))
def test_percentile_monotone_in_rank(xs, p1, p2):
    lo, hi = sorted((p1, p2))
    assert percentile(xs, lo) <= percentile(xs, hi) + 1e-9


@given(lengths, st.floats(0, 100))
def test_percentile_bounded(xs, p):
    assert min(xs) - 1e-9 <= percentile(xs, p) <= max(xs) + 1e-9


@given(lengths, st.floats(0, 100), st.randoms())
def test_percentile_permutation_invariant(xs, p, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    assert percentile(xs, p) == percentile(ys, p)


@given(lengths)
def test_target_ordering(xs):
    lo, hi = min(xs), max(xs)
    med = select_target(xs, TargetStatistic.MEDIAN)
    mean = select_target(xs, TargetStatistic.MEAN)
    mn = select_target(xs, TargetStatistic.MINIMUM)
    assert mn == lo
    assert mn <= med <= hi
    assert mn <= mean <= hi
    assert med == ties_away(brute_percentile(xs, 50))


def test_half_token_interpolation_rounds_away():
    # rank 27 * 0.3 = 8.1 lands a tenth of the way from 1081 to 1086: exactly 1081.5
    xs = list(range(1, 9)) + [1081, 1086] + [2000 + i for i in range(18)]
    assert percentile(xs, 30) == 1081.5
    assert compute_range(CorrectLengthSample(tuple(xs))).lo == 1082
