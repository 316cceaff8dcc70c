"""Order statistics over correct-response lengths."""

from __future__ import annotations

import enum
import math
from fractions import Fraction
from typing import Iterable

from .types import CorrectLengthSample, EmptySample, round_half_away


class TargetStatistic(str, enum.Enum):
    MEDIAN = "median"
    MEAN = "mean"
    MINIMUM = "minimum"


def _values(sample: CorrectLengthSample | Iterable[int]) -> list[int]:
    if isinstance(sample, CorrectLengthSample):
        return list(sample.lengths)
    return list(sample)


def percentile(sample: CorrectLengthSample | Iterable[int], p: float) -> float:
    """Linear-interpolation percentile on rank ``(n - 1) * p / 100``.

    Interpolation runs in exact rational arithmetic: in floating point a true
    half-token value such as 1083.5 can come out as 1083.4999999999998 and
    then round the wrong way.
    """
    xs = sorted(_values(sample))
    if not xs:
        raise EmptySample("percentile of an empty sample")
    if not 0 <= p <= 100:
        raise ValueError(f"percentile rank must lie in [0, 100], got {p}")
    h = (len(xs) - 1) * Fraction(p) / 100
    lo = math.floor(h)
    if lo + 1 >= len(xs):
        return float(xs[-1])
    return float(xs[lo] + (h - lo) * (Fraction(xs[lo + 1]) - Fraction(xs[lo])))


def select_target(sample: CorrectLengthSample | Iterable[int], stat: TargetStatistic) -> int:
    xs = _values(sample)
    if not xs:
        raise EmptySample("no correct lengths to derive a target from")
    stat = TargetStatistic(stat)
    if stat is TargetStatistic.MEDIAN:
        value = round_half_away(percentile(xs, 50))
    elif stat is TargetStatistic.MEAN:
        value = round_half_away(math.fsum(xs) / len(xs))
    else:
        value = min(xs)
    return max(1, value)
