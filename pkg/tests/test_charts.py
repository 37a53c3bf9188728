import pytest
from PIL import Image

import charts
from bench import BenchmarkRecord
from errors import GeosegError
from metrics import ConfusionMatrix, report


def test_metrics_comparison_chart(tmp_path):
    reports = {
        "UNet": report(ConfusionMatrix(6, 2, 3, 5)),
        "FCN32s": report(ConfusionMatrix(4, 4, 5, 3)),
    }
    assert reports["FCN32s"].kappa < 0
    path = charts.plot_metrics_comparison(reports, tmp_path / "result" / charts.METRICS_CHART_NAME)
    assert path.exists()
    with Image.open(path) as image:
        assert image.format == "PNG"


def test_benchmark_chart_with_missing_stage(tmp_path):
    records = [
        BenchmarkRecord("FCN8s", "training", 40.0, 4, 1, 5, 0.5, "cpu"),
        BenchmarkRecord("FCN8s", "testing", 90.0, 4, 1, 5, 0.2, "cpu"),
        BenchmarkRecord("BRNet", "testing", 120.0, 4, 1, 5, 0.2, "cpu"),
    ]
    path = charts.plot_benchmark(records, tmp_path / charts.BENCHMARK_CHART_NAME)
    with Image.open(path) as image:
        assert image.format == "PNG"
        assert image.size[0] > image.size[1]


def test_charts_need_input(tmp_path):
    with pytest.raises(GeosegError) as exc:
        charts.plot_metrics_comparison({}, tmp_path / "m.png")
    assert exc.value.code == "empty-input"
    with pytest.raises(GeosegError):
        charts.plot_benchmark([], tmp_path / "b.png")
