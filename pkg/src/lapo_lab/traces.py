"""Keyword-behaviour analysis of reasoning traces.

Counts lexicon hits per category (case-insensitive, whole words/phrases only)
and normalises them per 1000 whitespace-delimited tokens, grouped by the
trace's stage label.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .types import ConfigError

DEFAULT_LEXICON: dict[str, list[str]] = {
    "Self-Correction and Verification": ["wait", "verify", "check", "recheck", "mistake"],
    "Exploration and Alternatives": ["alternatively", "another way", "another approach", "instead"],
    "Context Setting": ["we need to", "the problem asks", "given that"],
    "Conclusion Drawing": ["therefore", "thus", "so the answer"],
}


def compile_lexicon(lexicon: Mapping[str, Sequence[str]]) -> dict[str, re.Pattern]:
    if not lexicon:
        raise ConfigError("lexicon needs at least one category")
    out = {}
    for cat, words in lexicon.items():
        if not isinstance(words, (list, tuple)) or not words or not all(isinstance(w, str) and w.strip() for w in words):
            raise ConfigError(f"lexicon category {cat!r} must be a non-empty list of keywords")
        # longest first so "another way" wins over a shorter overlapping entry
        alts = sorted({w.strip().lower() for w in words}, key=len, reverse=True)
        body = "|".join(r"\s+".join(map(re.escape, w.split())) for w in alts)
        out[cat] = re.compile(rf"(?<!\w)(?:{body})(?!\w)", re.IGNORECASE)
    return out


def load_lexicon(path: str | Path) -> dict[str, list[str]]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed lexicon JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: lexicon must map category names to keyword lists")
    compile_lexicon(raw)
    return raw


def count_keywords(text: str, patterns: Mapping[str, re.Pattern]) -> dict[str, int]:
    return {cat: len(p.findall(text)) for cat, p in patterns.items()}


@dataclass
class TraceReport:
    categories: list[str]
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    tokens: dict[str, int] = field(default_factory=dict)
    skipped: int = 0

    def frequency(self, stage: str, category: str) -> float:
        """Hits per 1000 tokens; zero for a stage with no tokens."""
        n = self.tokens.get(stage, 0)
        return 1000.0 * self.counts.get(stage, {}).get(category, 0) / n if n else 0.0

    def rows(self) -> list[tuple[str, str, float]]:
        stages = sorted(self.counts) or ["all"]
        return [(s, c, self.frequency(s, c)) for s in stages for c in self.categories]


def analyze_traces(path: str | Path, lexicon: Mapping[str, Sequence[str]] | None = None) -> TraceReport:
    patterns = compile_lexicon(lexicon or DEFAULT_LEXICON)
    report = TraceReport(list(patterns))
    counts: dict[str, dict[str, int]] = defaultdict(lambda: dict.fromkeys(patterns, 0))
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                text, stage = rec["text"], rec["stage_label"]
                if not isinstance(text, str) or not isinstance(stage, str):
                    raise TypeError("text and stage_label must be strings")
            except (json.JSONDecodeError, KeyError, TypeError):
                report.skipped += 1
                continue
            for cat, n in count_keywords(text, patterns).items():
                counts[stage][cat] += n
            report.tokens[stage] = report.tokens.get(stage, 0) + len(text.split())
    report.counts = dict(counts)
    return report


def write_trace_tsv(report: TraceReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("stage\tcategory\tfreq\n")
        for stage, cat, freq in report.rows():
            fh.write(f"{stage}\t{cat}\t{freq:.4f}\n")
