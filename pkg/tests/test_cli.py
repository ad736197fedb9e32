import csv
import json
import subprocess
import sys

import pytest

from churnnet.cli import main

CONFIG = """
[bench]
learners=no-wvrn,rl-wvrn,no-cdrn
timeframes=short
schemes=length
metrics=auc,lift@0.05
nrc_learners=no-wvrn
[grid]
directions=undirected,outgoing
schemes=count
decay=none
segments=whole,wd
reciprocity=full
metrics=auc
"""


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "exp.cfg"
    cfg.write_text(CONFIG)

    def call(*argv, out="o"):
        return main(["--config", str(cfg), "--seed", "3", "--out", str(root / out), *argv])

    assert call("synth", "--customers", "600", "--sparsity", "0.02", "--homophily", "0.8", out="data") == 0
    return root, call


def test_synth_outputs(run):
    root, _ = run
    data = root / "data"
    assert (data / "cdr.csv").read_text().startswith("caller,callee,timestamp,duration\n")
    meta = json.loads((data / "synth.json").read_text())
    assert meta["config"]["seed"] == 3 and meta["config"]["n_customers"] == 600
    with open(data / "labels.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 600


def test_graph_features_scores(run, capsys):
    root, call = run
    cdr = str(root / "data" / "cdr.csv")
    assert call("build-graph", "--cdr", cdr, "--months", "3-4", "--direction", "outgoing", out="g") == 0
    assert (root / "g" / "graph.csv").exists()
    assert call("featurize", "--cdr", cdr, "--mode", "all", "--learners", "no-wvrn", out="f") == 0
    head = (root / "f" / "features.csv").read_text().splitlines()[0].split(",")
    assert head[0] == "customer_id" and head[-2:] == ["no-wvrn", "label"]
    assert call("score", "--cdr", cdr, "--learners", "no-wvrn,rl-cdrn", out="s") == 0
    scores = (root / "s" / "scores.csv").read_text().splitlines()
    assert scores[0] == "customer_id,learner_id,score" and (len(scores) - 1) % 2 == 0 and len(scores) > 1100
    assert call("evaluate", "--scores", str(root / "s" / "scores.csv"), "--labels", str(root / "s" / "labels.csv"),
                "--metrics", "auc,mp", out="e") == 0
    with open(root / "e" / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {(r["model"], r["metric"]) for r in rows} == {(m, x) for m in ("no-wvrn", "rl-cdrn") for x in ("auc", "mp")}
    capsys.readouterr()


def test_train_evaluate_grid_stats_report(run, capsys):
    root, call = run
    cdr = str(root / "data" / "cdr.csv")
    assert call("train", "--cdr", cdr, out="t") == 0
    assert (root / "t" / "model_all.json").exists() and (root / "t" / "nrc_report.csv").exists()
    assert call("evaluate", "--cdr", cdr, out="t") == 0
    assert call("grid", "--cdr", cdr, "--limit", "2", out="grid") == 0
    assert "2 cells pending" in capsys.readouterr().out
    assert call("grid", "--cdr", cdr, out="grid") == 0
    assert (root / "grid" / "grid_report.csv").exists()
    reports = [str(root / "t" / "nrc_report.csv"), str(root / "t" / "learner_report.csv"),
               str(root / "grid" / "grid_report.csv")]
    assert call("stats", "--report", *reports, out="st") == 0
    summary = json.loads((root / "st" / "stats.json").read_text())
    assert "auc" in summary["metrics"] and "architecture" in summary
    out = capsys.readouterr().out
    # one dataset and one timeframe give a single score set, too few to rank learners
    assert "nrc_all_best" in out and "underpowered" in out
    assert call("report", "--report", str(root / "grid" / "grid_report.csv"), out="rep") == 0
    assert (root / "rep" / "table_cdr_full_auc.csv").exists()


def test_errors_exit_nonzero(run, capsys, tmp_path):
    _, call = run
    assert call("stats", "--report", str(tmp_path / "missing.csv")) == 1
    assert call("score", "--cdr", str(tmp_path / "missing.csv")) == 1
    assert main(["--workers", "0", "--out", str(tmp_path), "stats", "--report", "x"]) == 1
    assert "churnnet: error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["bogus"])


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "churnnet", "--out", str(tmp_path), "--seed", "1", "synth",
                          "--customers", "200", "--sparsity", "0.05"], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "cdr.csv").exists()
    res = subprocess.run([sys.executable, "-m", "churnnet", "--help"], capture_output=True, text=True)
    for cmd in ("synth", "build-graph", "featurize", "score", "train", "evaluate", "grid", "stats", "report"):
        assert cmd in res.stdout
