import json
from pathlib import Path

import pytest

from trajdet.cli import main
from trajdet.trajectory import read_dataset


def run(argv):
    return main(argv)


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "usage" in capsys.readouterr().out


def test_unknown_subcommand_exit_2(capsys):
    assert run(["frobnicate"]) == 2


def test_missing_file_exit_3(tmp_path, capsys):
    assert run(["evidence", "--data", str(tmp_path / "none.jsonl"),
                "--out", str(tmp_path / "o.csv")]) == 3
    assert "error:3:" in capsys.readouterr().err


def test_invalid_data_exit_4(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"d_q": 0, "T": 2, "l": 3}\n')
    assert run(["evidence", "--data", str(bad), "--out", str(tmp_path / "o.csv")]) == 4
    assert "error:4:" in capsys.readouterr().err


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    data = root / "data.jsonl"
    assert run(["simulate", "--out", str(data), "--seed", "3",
                "--n-factual", "120", "--n-hallucinated", "120",
                "--steps", "12", "--length", "24"]) == 0
    return root, data


def test_simulate_output_valid(pipeline_dir):
    _, data = pipeline_dir
    header, trajs = read_dataset(data)
    assert len(trajs) == 240
    assert header.T == 12


def test_evidence_and_filter_stats(pipeline_dir, capsys):
    root, data = pipeline_dir
    out = root / "evidence.csv"
    assert run(["evidence", "--data", str(data), "--out", str(out)]) == 0
    assert out.read_text().startswith("id,label,t,mean,max,topk,kept_count")
    assert run(["filter-stats", "--data", str(data)]) == 0
    text = capsys.readouterr().out
    assert "kept" in text and "control" in text


def _train_config(root):
    cfg = {
        "stage1": {"epochs": 30, "batch": 64},
        "stage2": {"epochs": 10, "batch": 64, "lr": 1e-3, "wd": 1e-4},
        "split": [160, 40, 40],
        "seed": 7,
    }
    path = root / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_full_pipeline_deterministic(pipeline_dir):
    root, data = pipeline_dir
    cfg = _train_config(root)
    out1, out2 = root / "run1", root / "run2"
    for out in (out1, out2):
        assert run(["train", "--data", str(data), "--config", str(cfg),
                    "--out", str(out)]) == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    assert (out1 / "epochs.csv").read_bytes() == (out2 / "epochs.csv").read_bytes()


def test_score_and_eval(pipeline_dir, capsys):
    root, data = pipeline_dir
    cfg = _train_config(root)
    model = root / "model"
    assert run(["train", "--data", str(data), "--config", str(cfg),
                "--out", str(model)]) == 0
    scores = root / "scores.csv"
    assert run(["score", "--data", str(data), "--model", str(model),
                "--out", str(scores)]) == 0
    head = scores.read_text().splitlines()[0]
    assert head.startswith("id,prob,s_path,s_reb,omega_t12")
    assert run(["eval", "--data", str(data), "--model", str(model)]) == 0
    assert "AUROC" in capsys.readouterr().out


def test_train_ref_subcommand(pipeline_dir):
    root, data = pipeline_dir
    cfg = _train_config(root)
    out = root / "gen.json"
    assert run(["train-ref", "--data", str(data), "--config", str(cfg),
                "--out", str(out)]) == 0
    obj = json.loads(out.read_text())
    assert obj["type"] == "reference_generator"


def test_gridsearch_subcommand(pipeline_dir):
    root, data = pipeline_dir
    cfg_path = root / "gcfg.json"
    cfg_path.write_text(json.dumps({
        "stage1": {"epochs": 5}, "stage2": {"epochs": 3},
        "split": [160, 40, 40],
    }))
    grid = root / "grid.json"
    grid.write_text(json.dumps({"lambda1": [0.0, 0.2]}))
    out = root / "grid_out"
    assert run(["gridsearch", "--data", str(data), "--config", str(cfg_path),
                "--grid", str(grid), "--out", str(out)]) == 0
    reports = json.loads((out / "grid_reports.json").read_text())
    assert len(reports) == 2


def test_flag_overrides_config(pipeline_dir):
    root, data = pipeline_dir
    cfg = _train_config(root)
    out = root / "override"
    assert run(["train", "--data", str(data), "--config", str(cfg),
                "--out", str(out), "--lambda1", "0.33"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["lambda1"] == 0.33


def test_inputs_not_mutated(pipeline_dir):
    root, data = pipeline_dir
    before = data.read_bytes()
    run(["filter-stats", "--data", str(data)])
    assert data.read_bytes() == before
