import json

import pytest
from PIL import Image

from src.reporting.chart import render_ratio_chart
from src.reporting.metrics import METRICS_HEADER, MetricsWriter, resource_footprint, write_run_report
from src.runtime_model.runtime_model import tradeoff_rows
from src.strategies.trainer import MetricsRow


def _row(k, accuracy=None):
    return MetricsRow(k, "Clean", 0.25, accuracy, float(k), 0.1 * k, 1e-3, 0)


def test_metrics_csv_format(tmp_path):
    path = tmp_path / "metrics.csv"
    with MetricsWriter(str(path)) as metrics:
        metrics.write(_row(1))
        metrics.write(_row(2, accuracy=0.5))
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == ",".join(METRICS_HEADER)
    assert lines[1] == "1,Clean,0.25,,1,0.10000000000000001,0.001,0"
    assert lines[2].split(",")[3] == "0.5"


def test_metrics_iter_must_increase(tmp_path):
    with MetricsWriter(str(tmp_path / "m.csv")) as metrics:
        metrics.write(_row(3))
        with pytest.raises(ValueError):
            metrics.write(_row(3))


def test_resource_footprint():
    usage = resource_footprint()
    assert set(usage) == {"rss_bytes", "cpu_user_seconds", "cpu_system_seconds"}
    assert usage["rss_bytes"] > 0


def test_run_report_is_json(tmp_path):
    path = tmp_path / "report.json"
    write_run_report(str(path), {"outcomes": {"Clean": 3}, "final_accuracy": None})
    assert json.loads(path.read_text()) == {"outcomes": {"Clean": 3}, "final_accuracy": None}


def test_ratio_chart(tmp_path):
    path = tmp_path / "ratio.png"
    image = render_ratio_chart(tradeoff_rows([0.1, 0.5, 1.0], iterations=100), str(path), size=(400, 300))
    assert image.size == (400, 300)
    with Image.open(path) as saved:
        assert saved.format == "PNG"
    with pytest.raises(ValueError):
        render_ratio_chart([], str(tmp_path / "empty.png"))
