"""Command-line entry point: ``lapo-lab {train,eval,ablate,analyze,report}``.

Exit codes: 0 success, 2 config/usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
from collections import defaultdict
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import length_map as lm
from .ablation import run_guidance_ablation, run_target_statistic_ablation, write_ablation
from .config import RunConfig, dump_config, eval_bank, training_bank
from .evaluation import EvalReport, difficulty_allocation, evaluate, write_eval_csv, write_tier_tsv
from .pipeline import run_lapo
from .policy_env import EnvModel, load_policy, save_policy
from .traces import analyze_traces, load_lexicon, write_trace_tsv
from .types import ConfigError, default_bank, load_bank

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

log = logging.getLogger("lapo_lab")


def data_path(name: str) -> Path:
    return Path(str(resources.files("lapo_lab") / "data" / name))


def _prepare_dir(path: Path, force: bool) -> None:
    if path.exists() and any(path.iterdir()):
        if not force:
            raise ConfigError(f"output directory {path} already exists; pass --force to overwrite")
        shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    rc = RunConfig.from_file(args.config)
    raw = dict(rc.raw)
    if getattr(args, "output", None):
        raw["output_dir"] = str(args.output)
    if getattr(args, "threads", None):
        raw["threads"] = args.threads
    # pin bank paths so the config echo stays valid from inside the run directory
    for section, key in (("bank", "path"), ("eval", "bank_path")):
        value = raw[section][key]
        if value and not Path(value).is_absolute() and rc.base_dir is not None:
            raw[section] = {**raw[section], key: str((rc.base_dir / value).resolve())}
    return RunConfig(raw, replace(rc.lapo, threads=raw["threads"]), rc.base_dir)


def _output_dir(rc: RunConfig) -> Path:
    # relative output paths resolve against the working directory, not the config file
    return Path(rc.raw["output_dir"])


def cmd_train(args: argparse.Namespace) -> int:
    rc = _load_run_config(args)
    out = _output_dir(rc)
    bank = training_bank(rc.raw, rc.base_dir)
    _prepare_dir(out, args.force)
    dump_config(rc.raw, out / "config.yaml")
    with open(out / "steps.jsonl", "w", encoding="utf-8") as sink:
        _, final = run_lapo(rc.lapo, bank, sink)
    save_policy(final.params, out / "params.json")
    lm.save(final.map, out / "map.json")
    log.info("wrote run artifacts to %s", out)
    return EXIT_OK


def _env_from_args(args: argparse.Namespace) -> EnvModel:
    if getattr(args, "config", None):
        return RunConfig.from_file(args.config).lapo.env
    return EnvModel()


def cmd_eval(args: argparse.Namespace) -> int:
    if args.budget_from_map and not args.map:
        raise ConfigError("--budget-from-map needs --map")
    if args.map and not Path(args.map).exists():
        raise ConfigError(f"length map not found: {args.map}")
    policy = load_policy(args.params)
    budget_map = lm.load(args.map) if args.budget_from_map else None
    bank = load_bank(args.bank) if args.bank else default_bank()
    missing = [p.id for p in bank if p.id not in policy]
    if missing:
        raise ConfigError(f"params file has no entry for {len(missing)} bank problems (first: {missing[0]})")
    report = evaluate(policy, _env_from_args(args), bank, args.samples, budget_map, seed=args.seed)
    write_eval_csv({"eval": report}, args.out)
    _print_report(report)
    return EXIT_OK


def _print_report(report: EvalReport) -> None:
    for bench, r in report.benchmarks.items():
        print(f"{bench}: Pass@1 {100 * r.pass1:.1f}  #Tok {r.avg_tokens:.0f}")


def cmd_ablate(args: argparse.Namespace) -> int:
    rc = _load_run_config(args)
    out = _output_dir(rc)
    bank = training_bank(rc.raw, rc.base_dir)
    ebank = eval_bank(rc.raw, rc.base_dir)
    _prepare_dir(out, args.force)
    runner = run_guidance_ablation if args.which == "guidance" else run_target_statistic_ablation
    result = runner(rc.lapo, bank, ebank, rc.raw["eval"]["samples"])
    for name, arm in result.arms.items():
        arm_dir = out / name
        arm_dir.mkdir()
        arm_raw = dict(rc.raw)
        arm_raw["guidance" if args.which == "guidance" else "target_statistic"] = name
        dump_config(arm_raw, arm_dir / "config.yaml")
        save_policy(arm.state.params, arm_dir / "params.json")
        lm.save(arm.state.map, arm_dir / "map.json")
        write_eval_csv({name: arm.report}, arm_dir / "eval.csv")
    write_ablation(result, rc.lapo, out)
    for name, arm in result.arms.items():
        print(f"[{name}]", end=" ")
        _print_report(arm.report)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    lexicon = load_lexicon(args.lexicon) if args.lexicon else None
    report = analyze_traces(args.traces, lexicon)
    write_trace_tsv(report, args.out)
    if report.skipped:
        log.warning("skipped %d malformed trace records", report.skipped)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    run = Path(args.run_dir)
    rc = RunConfig.from_file(run / "config.yaml")
    policy = load_policy(run / "params.json")
    final_map = lm.load(run / "map.json")
    ebank = eval_bank(rc.raw, rc.base_dir)
    cfg = rc.lapo
    budget_map = final_map if cfg.internalization.episodes > 0 and cfg.guidance.value != "implicit" else None
    report = evaluate(policy, cfg.env, ebank, args.samples or rc.raw["eval"]["samples"], budget_map, seed=cfg.seed)
    write_eval_csv({"lapo": report}, run / "report.csv")
    for bench in report.benchmarks:
        suffix = "" if len(report.benchmarks) == 1 else f"_{bench}"
        write_tier_tsv(difficulty_allocation(report, bench), run / f"allocation{suffix}.tsv")
    steps = run / "steps.jsonl"
    if steps.exists():
        _write_step_metrics(steps, run / "metrics.tsv")
    _print_report(report)
    return EXIT_OK


def _write_step_metrics(steps: Path, out: Path) -> None:
    agg: dict[tuple[int, str], list[list[float]]] = defaultdict(lambda: [[], [], []])
    with open(steps, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            a = agg[(rec["step"], rec["stage"])]
            a[0].extend(rec["rewards"])
            a[1].extend(rec["lengths"])
            a[2].extend(float(c) for c in rec["corrects"])
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("step\tstage\tmean_reward\tmean_length\taccuracy\n")
        for (step, stage), (r, L, c) in sorted(agg.items()):
            fh.write(f"{step}\t{stage}\t{sum(r) / len(r):.4f}\t{sum(L) / len(L):.2f}\t{sum(c) / len(c):.4f}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lapo-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run Discovery then Internalization")
    p.add_argument("config", help="YAML run config")
    p.add_argument("--output", help="override output_dir")
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on this)")
    p.add_argument("--force", action="store_true", help="overwrite an existing run directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate saved policy params on a bank")
    p.add_argument("params", help="params.json from a run")
    p.add_argument("--map", help="map.json from a run")
    p.add_argument("--bank", help="problem bank JSON (default: built-in synthetic bank)")
    p.add_argument("--config", help="run config supplying the environment")
    p.add_argument("--samples", type=int, default=4, help="samples per problem (k)")
    p.add_argument("--budget-from-map", action="store_true", help="condition generation on map targets")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="eval.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run a paired ablation")
    p.add_argument("config")
    p.add_argument("--which", choices=["guidance", "statistic"], required=True)
    p.add_argument("--output")
    p.add_argument("--threads", type=int)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("analyze", help="keyword-behaviour frequencies for reasoning traces")
    p.add_argument("traces", help="JSONL with {text, stage_label} records")
    p.add_argument("--lexicon", help="JSON mapping category -> keyword list")
    p.add_argument("--out", default="keywords.tsv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="tables and plot data for a finished run directory")
    p.add_argument("run_dir")
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("LAPO_LAB_LOG", "WARNING").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
