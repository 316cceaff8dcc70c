from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest

from lapo_lab.traces import (
    DEFAULT_LEXICON,
    analyze_traces,
    compile_lexicon,
    count_keywords,
    load_lexicon,
    write_trace_tsv,
)
from lapo_lab.types import ConfigError

SC, EX, CT, CD = DEFAULT_LEXICON
FIXTURE = Path(str(resources.files("lapo_lab") / "data" / "sample_traces.jsonl"))

# hand counts for the bundled 20-trace corpus
HAND = {
    "base": {"tokens": 108, SC: 12, EX: 4, CT: 4, CD: 4},
    "lapo": {"tokens": 57, SC: 3, EX: 3, CT: 4, CD: 8},
}


def _write(tmp_path, records, name="t.jsonl"):
    path = tmp_path / name
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in records))
    return path


def test_fixture_matches_hand_counts():
    report = analyze_traces(FIXTURE)
    assert report.skipped == 0
    assert sorted(report.counts) == ["base", "lapo"]
    for stage, hand in HAND.items():
        assert report.tokens[stage] == hand["tokens"]
        for cat in DEFAULT_LEXICON:
            assert report.counts[stage][cat] == hand[cat]
            assert report.frequency(stage, cat) == pytest.approx(1000 * hand[cat] / hand["tokens"], abs=1e-12)


def test_example_sentence():
    counts = count_keywords("Wait, let me verify this. Alternatively, try X.", compile_lexicon(DEFAULT_LEXICON))
    assert counts[SC] == 2 and counts[EX] == 1 and counts[CT] == 0 and counts[CD] == 0


def test_word_boundary():
    pats = compile_lexicon(DEFAULT_LEXICON)
    assert count_keywords("She awaits the checkpoint; thusly unverified.", pats)[SC] == 0
    assert count_keywords("wait-and-see, then (check).", pats)[SC] == 2
    assert count_keywords("another\n  way", pats)[EX] == 1


def test_empty_file(tmp_path):
    report = analyze_traces(_write(tmp_path, []))
    assert report.rows() == [("all", c, 0.0) for c in DEFAULT_LEXICON]
    write_trace_tsv(report, tmp_path / "o.tsv")
    lines = (tmp_path / "o.tsv").read_text().splitlines()
    assert lines[0] == "stage\tcategory\tfreq" and len(lines) == 5
    assert all(line.endswith("\t0.0000") for line in lines[1:])


def test_casing_invariance(tmp_path):
    recs = [json.loads(line) for line in FIXTURE.read_text().splitlines()]
    upper = [{**r, "text": r["text"].upper()} for r in recs]
    a = analyze_traces(FIXTURE)
    b = analyze_traces(_write(tmp_path, upper))
    assert a.counts == b.counts and a.tokens == b.tokens


def test_malformed_records_skipped(tmp_path):
    path = _write(tmp_path, [
        {"text": "Wait.", "stage_label": "s"},
        "{not json",
        {"text": "Thus."},
        {"text": 3, "stage_label": "s"},
        "",
        {"text": "Therefore wait", "stage_label": "s"},
    ])
    report = analyze_traces(path)
    assert report.skipped == 3
    assert report.counts["s"][SC] == 2 and report.counts["s"][CD] == 1
    assert report.tokens["s"] == 3


def test_custom_lexicon(tmp_path):
    lex = tmp_path / "lex.json"
    lex.write_text(json.dumps({"Hedging": ["perhaps", "maybe"]}))
    report = analyze_traces(_write(tmp_path, [{"text": "Maybe. Perhaps not maybe", "stage_label": "x"}]), load_lexicon(lex))
    assert report.rows() == [("x", "Hedging", pytest.approx(750.0))]


@pytest.mark.parametrize("bad", ['{"A": []}', '["wait"]', "{}", "{oops", '{"A": [""]}'])
def test_bad_lexicon(tmp_path, bad):
    lex = tmp_path / "lex.json"
    lex.write_text(bad)
    with pytest.raises(ConfigError):
        load_lexicon(lex)
