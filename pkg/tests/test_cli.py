from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from lapo_lab.cli import data_path, main
from lapo_lab.traces import DEFAULT_LEXICON

SMALL = """\
seed: 5
bank:
  tiers: 5
  per_tier: 3
eval:
  samples: 4
discovery:
  episodes: 1
  steps_per_episode: 4
  batch_size: 8
internalization:
  episodes: 1
  steps_per_episode: 4
  batch_size: 8
"""


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL)
    return path


def _train(cfg_path, out, *extra):
    return main(["train", str(cfg_path), "--output", str(out), *extra])


def test_missing_config_exits_2(tmp_path, capsys):
    assert main(["train", str(tmp_path / "absent.yaml")]) == 2
    assert "absent.yaml" in capsys.readouterr().err


def test_bad_config_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("seed: 1\nbogus: 2\n")
    assert main(["train", str(path), "--output", str(tmp_path / "r")]) == 2
    assert "bad.yaml:2" in capsys.readouterr().err


def test_train_artifacts_and_determinism(cfg_path, tmp_path):
    assert _train(cfg_path, tmp_path / "a") == 0
    assert sorted(p.name for p in (tmp_path / "a").iterdir()) == ["config.yaml", "map.json", "params.json", "steps.jsonl"]
    assert _train(cfg_path, tmp_path / "b") == 0
    assert _train(cfg_path, tmp_path / "c", "--threads", "4") == 0
    logs = [(tmp_path / d / "steps.jsonl").read_bytes() for d in "abc"]
    assert logs[0] == logs[1] == logs[2]
    assert (tmp_path / "a" / "params.json").read_bytes() == (tmp_path / "c" / "params.json").read_bytes()
    first = json.loads(logs[0].splitlines()[0])
    assert {"step", "stage", "problem_id", "n_or_null", "lengths", "corrects", "rewards", "advantages",
            "map_target_after"} <= set(first)


def test_train_refuses_existing_dir_without_force(cfg_path, tmp_path):
    assert _train(cfg_path, tmp_path / "a") == 0
    (tmp_path / "a" / "stale.txt").write_text("x")
    assert _train(cfg_path, tmp_path / "a") == 2
    assert _train(cfg_path, tmp_path / "a", "--force") == 0
    assert not (tmp_path / "a" / "stale.txt").exists()


def test_bundled_default_config_trains(tmp_path):
    out = tmp_path / "run"
    assert main(["train", str(data_path("default_config.yaml")), "--output", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"config.yaml", "map.json", "params.json", "steps.jsonl"}


def test_eval(cfg_path, tmp_path):
    _train(cfg_path, tmp_path / "r")
    bank = tmp_path / "bank.json"
    from lapo_lab.types import default_bank, save_bank

    save_bank(default_bank(5, 3), bank)
    params = str(tmp_path / "r" / "params.json")
    common = ["--bank", str(bank), "--config", str(cfg_path)]
    assert main(["eval", params, *common, "--out", str(tmp_path / "e4.csv")]) == 0
    assert main(["eval", params, *common, "--samples", "32", "--out", str(tmp_path / "e32.csv")]) == 0
    rows4 = list(csv.DictReader(open(tmp_path / "e4.csv")))
    rows32 = list(csv.DictReader(open(tmp_path / "e32.csv")))
    assert len(rows4) == len(rows32) == 1 and rows4[0]["benchmark"] == "synthetic"
    assert main(["eval", params, *common, "--map", str(tmp_path / "r" / "map.json"), "--budget-from-map",
                 "--out", str(tmp_path / "m.csv")]) == 0
    assert main(["eval", params, *common, "--map", str(tmp_path / "nope.json"), "--budget-from-map"]) == 2
    assert main(["eval", params, *common, "--budget-from-map"]) == 2
    assert main(["eval", str(tmp_path / "missing.json"), *common]) == 3


@pytest.mark.parametrize("which,arms", [("statistic", ["mean", "median", "minimum"]),
                                        ("guidance", ["exact", "implicit", "range"])])
def test_ablate(cfg_path, tmp_path, which, arms):
    out = tmp_path / which
    assert main(["ablate", str(cfg_path), "--which", which, "--output", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir() if p.is_dir()) == arms
    rows = list(csv.DictReader(open(out / "ablation.csv")))
    assert len(rows) == len(arms) * 1
    assert json.loads((out / "ablation_header.json").read_text())["varied"] in ("guidance", "target_statistic")
    for arm in arms:
        assert (out / arm / "config.yaml").exists() and (out / arm / "eval.csv").exists()


def test_analyze(tmp_path):
    out = tmp_path / "kw.tsv"
    assert main(["analyze", str(data_path("sample_traces.jsonl")), "--out", str(out)]) == 0
    rows = [line.split("\t") for line in out.read_text().splitlines()[1:]]
    assert {r[1] for r in rows} == set(DEFAULT_LEXICON) and len(rows) == 8

    lex = tmp_path / "lex.json"
    lex.write_text(json.dumps({"Only": ["wait"]}))
    assert main(["analyze", str(data_path("sample_traces.jsonl")), "--lexicon", str(lex), "--out", str(out)]) == 0
    assert {line.split("\t")[1] for line in out.read_text().splitlines()[1:]} == {"Only"}

    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["analyze", str(empty), "--out", str(out)]) == 0
    assert all(line.endswith("0.0000") for line in out.read_text().splitlines()[1:])

    lex.write_text("{broken")
    assert main(["analyze", str(empty), "--lexicon", str(lex), "--out", str(out)]) == 2


def test_report(cfg_path, tmp_path):
    _train(cfg_path, tmp_path / "r")
    assert main(["report", str(tmp_path / "r")]) == 0
    for name in ("report.csv", "allocation.tsv", "metrics.tsv"):
        assert (tmp_path / "r" / name).exists()
    metrics = (tmp_path / "r" / "metrics.tsv").read_text().splitlines()
    assert metrics[0] == "step\tstage\tmean_reward\tmean_length\taccuracy" and len(metrics) == 9


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lapo_lab", "train", str(tmp_path / "x.yaml")],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "x.yaml" in proc.stderr
