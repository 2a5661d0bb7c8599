import csv
import json
import logging

import pytest

from src.main import EXIT_CONFIG, EXIT_IO, EXIT_OK, main

TINY = """[experiment]
strategy = codenet
m = 2
n = 2
t = 1
iterations = 12
checkpoint_period = 4
eval_every = 6
eval_samples = 10

[network]
layers = [6, 5, 3]

[faults]
model = probabilistic
p = 0.001

[outputs]
train_samples = 30
test_samples = 10
"""


@pytest.fixture(autouse=True)
def release_log_handlers():
    yield
    root = logging.getLogger()
    for handler in [h for h in root.handlers if getattr(h, "_codenet", False)]:
        root.removeHandler(handler)
        handler.close()


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY)
    return str(path)


def test_verify_codec(capsys):
    assert main(["verify-codec", "--k", "3", "--t", "1", "--trials", "50"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("property")
    assert "FAIL" not in out


def test_model_curves_default_grid(capsys):
    assert main(["model-curves", "--iters", "100"]) == EXIT_OK
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["lambda", "i0_rep", "i0_codenet", "et_rep", "et_codenet", "ratio"]
    assert len(rows) == 51
    assert float(rows[1][0]) == 0.1 and float(rows[-1][0]) == 10.0


def test_model_curves_single_point_to_files(tmp_path):
    out, chart = tmp_path / "curve.csv", tmp_path / "curve.png"
    argv = ["model-curves", "--lambda-min", "1", "--lambda-max", "1", "--points", "1",
            "--period", "10", "--out", str(out), "--chart", str(chart)]
    assert main(argv) == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    assert lines[1].split(",")[1:3] == ["10", "10"]
    assert chart.stat().st_size > 0


def test_model_curves_rejects_bad_grid():
    assert main(["model-curves", "--lambda-min", "0"]) == EXIT_CONFIG


def test_train_writes_outputs(tiny_config, tmp_path):
    out = tmp_path / "run"
    assert main(["train", "--config", tiny_config, "--out", str(out)]) == EXIT_OK
    for name in ("metrics.csv", "run_report.json", "config.json", "checkpoint.cdnt", "codenet.log"):
        assert (out / name).exists(), name

    rows = list(csv.DictReader((out / "metrics.csv").open()))
    assert [int(r["iter"]) for r in rows] == list(range(1, len(rows) + 1))
    assert len(rows) >= 12
    assert rows[5]["accuracy"] != "" and rows[0]["accuracy"] == ""

    report = json.loads((out / "run_report.json").read_text())
    assert report["strategy"] == "codenet"
    assert report["completed"] is True
    assert report["nodes"]["used"] == report["nodes"]["codenet"] == 12
    assert report["nodes"]["replication"] == 8
    assert report["nodes"]["codenet_fewer_than_replication"] is False
    assert set(report["resources"]) == {"rss_bytes", "cpu_user_seconds", "cpu_system_seconds"}
    assert json.loads((out / "config.json").read_text())["experiment"]["m"] == 2


def test_metrics_are_reproducible(tiny_config, tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--config", tiny_config, "--out", str(first), "--seed", "4"]) == EXIT_OK
    assert main(["train", "--config", tiny_config, "--out", str(second), "--seed", "4"]) == EXIT_OK
    assert (first / "metrics.csv").read_bytes() == (second / "metrics.csv").read_bytes()


def test_resume_continues_from_a_checkpoint(tiny_config, tmp_path):
    out = tmp_path / "run"
    assert main(["train", "--config", tiny_config, "--out", str(out)]) == EXIT_OK
    saved = tmp_path / "saved.cdnt"
    saved.write_bytes((out / "checkpoint.cdnt").read_bytes())
    resumed = tmp_path / "resumed"
    assert main(["train", "--config", tiny_config, "--out", str(resumed), "--resume", str(saved)]) == EXIT_OK
    rows = list(csv.DictReader((resumed / "metrics.csv").open()))
    assert 0 < len(rows) < 12


def test_bad_config_exits_2(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[experiment]\nstrategy = uncoded\nt = 2\n")
    assert main(["train", "--config", str(path), "--out", str(tmp_path / "run")]) == EXIT_CONFIG


def test_missing_resume_file_exits_3(tiny_config, tmp_path):
    argv = ["train", "--config", tiny_config, "--out", str(tmp_path / "run"),
            "--resume", str(tmp_path / "absent.cdnt")]
    assert main(argv) == EXIT_IO


def test_report_compares_node_counts(tmp_path):
    from src.app import ExperimentApp
    from src.utils.config import ConfigManager

    config = ConfigManager()
    for key, value in (("experiment.m", 5), ("experiment.n", 4), ("experiment.t", 1),
                       ("network.layers", [20, 10, 4]), ("outputs.out_dir", str(tmp_path / "run")),
                       ("outputs.train_samples", 20), ("outputs.test_samples", 5)):
        config.set(key, value)
    nodes = ExperimentApp(config).node_counts()
    assert nodes == {"used": 38, "codenet": 38, "replication": 40, "uncoded": 20,
                     "codenet_fewer_than_replication": True}


def test_non_numeric_cost_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("[faults]\nalpha = fast\n")
    assert main(["train", "--config", str(path), "--out", str(tmp_path / "run")]) == EXIT_CONFIG
    assert "Traceback" not in capsys.readouterr().err
