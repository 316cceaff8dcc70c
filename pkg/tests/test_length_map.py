from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from lapo_lab import length_map as lm
from lapo_lab.length_map import LengthMap, MapEntry, get_target, update_discovery, update_internalization
from lapo_lab.stats import TargetStatistic
from lapo_lab.types import ConfigError, CorrectLengthSample

S = CorrectLengthSample
MED = TargetStatistic.MEDIAN


def test_get_target():
    m = LengthMap({"a": MapEntry(1200, True)})
    assert get_target(m, "unknown") == 4096
    assert get_target(m, "a") == 1200
    m = update_discovery(LengthMap(), "b", S())
    assert get_target(m, "b") == 4096


def test_update_discovery_examples():
    m = LengthMap({"q": MapEntry(900, True)})
    assert get_target(update_discovery(m, "q", S((1100, 1200, 1300)), MED), "q") == 1200
    reset = update_discovery(m, "q", S(), MED)
    assert get_target(reset, "q") == 4096
    assert reset.entries["q"].ever_solved  # solve history survives the reset
    assert get_target(update_discovery(LengthMap(), "new", S((700, 800, 900)), MED), "new") == 800


def test_update_internalization_examples():
    solved = LengthMap({"q": MapEntry(1000, True)})
    assert get_target(update_internalization(solved, "q", S((1100, 1200, 1300)), MED), "q") == 1000
    fresh = LengthMap({"q": MapEntry(4096, False)})
    out = update_internalization(fresh, "q", S((700, 800, 900)), MED)
    assert get_target(out, "q") == 800 and out.entries["q"].ever_solved
    # a discovery-stage reset to 4096 of a solved problem is still "previously solved"
    reset = LengthMap({"q": MapEntry(4096, True)})
    assert get_target(update_internalization(reset, "q", S((800,)), MED), "q") == 800
    assert update_internalization(solved, "q", S(), MED) == solved


def test_updates_do_not_mutate():
    m = LengthMap({"q": MapEntry(1000, True)})
    update_internalization(m, "q", S((10,)), MED)
    update_discovery(m, "q", S(), MED)
    assert m == LengthMap({"q": MapEntry(1000, True)})


def test_round_trip(tmp_path):
    m = LengthMap({"b": MapEntry(1200, True), "a": MapEntry(4096, False), "c": MapEntry(37, True)})
    lm.save(m, tmp_path / "map.json")
    assert lm.load(tmp_path / "map.json") == m
    raw = json.loads((tmp_path / "map.json").read_text())
    assert list(raw["entries"]) == ["a", "b", "c"]


def test_load_rejects_zero_target(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"default_target": 4096, "entries": {"q": {"target": 0, "ever_solved": True}}}))
    with pytest.raises(ConfigError, match="entries.q.target"):
        lm.load(p)


def test_load_rejects_empty_and_malformed(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("")
    with pytest.raises(ConfigError):
        lm.load(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        lm.load(p)
    p.write_text(json.dumps({"default_target": 4096, "entries": {"q": {"target": 5}}}))
    with pytest.raises(ConfigError, match="entries.q"):
        lm.load(p)


def test_invariants_enforced():
    with pytest.raises(ConfigError):
        LengthMap({"q": MapEntry(5000, True)})
    with pytest.raises(ConfigError):
        LengthMap({"q": MapEntry(100, False)})


samples = st.lists(st.integers(1, 4096), max_size=8).map(lambda xs: S(tuple(xs)))
stats_ = st.sampled_from(list(TargetStatistic))


@given(st.lists(samples, max_size=30), stats_)
def test_internalization_monotone_once_solved(seq, stat):
    m = LengthMap()
    prev = None
    for sample in seq:
        m = update_internalization(m, "q", sample, stat)
        entry = m.entries.get("q")
        if entry is not None and entry.ever_solved:
            if prev is not None:
                assert entry.target <= prev
            prev = entry.target
        assert get_target(m, "q") <= m.default_target


@given(st.lists(samples, max_size=10), stats_)
def test_discovery_reset(seq, stat):
    m = LengthMap()
    for sample in seq:
        m = update_discovery(m, "q", sample, stat)
    assert get_target(update_discovery(m, "q", S(), stat), "q") == 4096


@given(st.lists(samples, max_size=10), samples, stats_)
def test_internalization_idempotent(prefix, sample, stat):
    m = LengthMap()
    for s in prefix:
        m = update_internalization(m, "q", s, stat)
    once = update_internalization(m, "q", sample, stat)
    assert update_internalization(once, "q", sample, stat) == once
