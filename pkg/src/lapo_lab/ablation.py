"""Paired ablation drivers: target statistic and guidance form.

Arms share the training seed (common random numbers), so the Median arm is
exactly the unablated pipeline and the guidance arms share one Discovery
checkpoint. Each arm differs from the base config in a single field.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence, TextIO

from .evaluation import EvalReport, evaluate, format_pass1, format_tokens
from .pipeline import LapoConfig, RunState, conditioning_map, run_discovery, run_internalization, run_lapo
from .rewards import GuidanceMode
from .stats import TargetStatistic
from .types import Problem


@dataclass
class ArmResult:
    name: str
    config: LapoConfig
    state: RunState
    report: EvalReport


@dataclass
class AblationResult:
    varied: str
    arms: dict[str, ArmResult]

    def table(self) -> list[dict[str, Any]]:
        rows = []
        for name, arm in self.arms.items():
            for bench, r in arm.report.benchmarks.items():
                rows.append({"arm": name, "benchmark": bench, "Pass@1": format_pass1(r.pass1), "#Tok": format_tokens(r.avg_tokens)})
        return rows


def flatten_config(cfg: Any, prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        key = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(value):
            out.update(flatten_config(value, key + "."))
        else:
            out[key] = value.value if isinstance(value, enum.Enum) else value
    return out


def config_diff(a: LapoConfig, b: LapoConfig) -> list[str]:
    fa, fb = flatten_config(a), flatten_config(b)
    return sorted(k for k in fa if fa[k] != fb[k])


def _eval_arm(state: RunState, cfg: LapoConfig, eval_bank: Sequence[Problem], k: int) -> EvalReport:
    return evaluate(state.params, cfg.env, eval_bank, k, conditioning_map(state, cfg), seed=cfg.seed, tag="eval")


def run_target_statistic_ablation(
    cfg: LapoConfig, bank: Sequence[Problem], eval_bank: Sequence[Problem] | None = None, k: int = 8,
    sinks: dict[str, TextIO] | None = None,
) -> AblationResult:
    eval_bank = eval_bank or bank
    arms = {}
    for stat in TargetStatistic:
        arm_cfg = dataclasses.replace(cfg, target_statistic=stat)
        _, final = run_lapo(arm_cfg, bank, (sinks or {}).get(stat.value))
        arms[stat.value] = ArmResult(stat.value, arm_cfg, final, _eval_arm(final, arm_cfg, eval_bank, k))
    return AblationResult("target_statistic", arms)


def run_guidance_ablation(
    cfg: LapoConfig, bank: Sequence[Problem], eval_bank: Sequence[Problem] | None = None, k: int = 8,
    sinks: dict[str, TextIO] | None = None,
) -> AblationResult:
    eval_bank = eval_bank or bank
    discovered = run_discovery(cfg, bank)
    arms = {}
    for mode in GuidanceMode:
        arm_cfg = dataclasses.replace(cfg, guidance=mode)
        final = run_internalization(discovered, bank, arm_cfg, (sinks or {}).get(mode.value))
        arms[mode.value] = ArmResult(mode.value, arm_cfg, final, _eval_arm(final, arm_cfg, eval_bank, k))
    return AblationResult("guidance", arms)


def write_ablation(result: AblationResult, base: LapoConfig, out_dir: str | Path) -> None:
    """Combined CSV plus a JSON header recording which config field each arm changed."""
    out_dir = Path(out_dir)
    with open(out_dir / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["arm", "benchmark", "Pass@1", "#Tok"])
        writer.writeheader()
        writer.writerows(result.table())
    header = {
        "varied": result.varied,
        "arms": {name: {"diff_from_base": config_diff(base, arm.config)} for name, arm in result.arms.items()},
    }
    (out_dir / "ablation_header.json").write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
