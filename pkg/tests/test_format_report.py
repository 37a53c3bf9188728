from bench import BenchmarkRecord
from format_report import display_name, render_benchmark_table, render_metrics_table
from metrics import ConfusionMatrix, report


def test_metrics_table_layout():
    table = render_metrics_table({
        "UNet": report(ConfusionMatrix(6, 2, 3, 5)),
        "FCN8s": report(ConfusionMatrix(10, 0, 0, 6)),
    })
    lines = table.splitlines()
    assert lines[0].split() == ["Model", "Precision", "Recall", "Overall", "Acc.", "F1", "Jaccard", "Kappa"]
    assert lines[1].startswith("U-Net")
    assert lines[1].split()[-1] == "0.3750"
    assert lines[2].split()[1:] == ["1.0000*"] * 6
    assert "*" not in lines[1]
    # Columns line up
    assert len({len(line) for line in lines[:3]}) == 1


def test_metrics_table_stars_every_tied_best():
    table = render_metrics_table({
        "SegNet": report(ConfusionMatrix(6, 2, 3, 5)),
        "FPN": report(ConfusionMatrix(6, 2, 3, 5)),
        "FCN32s": report(ConfusionMatrix(4, 4, 5, 3)),
    })
    lines = table.splitlines()
    assert lines[1].split()[1:] == lines[2].split()[1:]
    assert all(v.endswith("*") for v in lines[1].split()[1:])
    assert "*" not in lines[3]
    assert lines[-1] == "* best value per metric"


def test_single_model_table_has_no_stars():
    table = render_metrics_table({"UNet": report(ConfusionMatrix(6, 2, 3, 5))})
    assert "*" not in table


def test_metrics_table_footnotes_for_zero_division():
    table = render_metrics_table({"MCFCN": report(ConfusionMatrix(0, 0, 0, 16))})
    assert "MC-FCN: Precision had a zero denominator" in table
    assert "[1]" in table and "[2]" in table


def test_benchmark_table_marks_fastest_and_failures():
    records = [
        BenchmarkRecord("FCN8s", "training", 40.0, 4, 1, 5, 0.5, "cpu"),
        BenchmarkRecord("FCN8s", "testing", 90.0, 4, 1, 5, 0.2, "cpu"),
        BenchmarkRecord("BRNet", "testing", 120.0, 4, 1, 5, 0.2, "cpu"),
    ]
    table = render_benchmark_table(records, {("BRNet", "training"): "oom"}, {"FCN8s": 2_500_000, "BRNet": 31_000_000})
    lines = table.splitlines()
    assert "40.0*" in lines[1] and "90.0 " in lines[1]
    assert "FAILED (oom)" in lines[2] and "120.0*" in lines[2]
    assert "2.50M" in lines[1] and "31.00M" in lines[2]
    assert lines[-1].startswith("* fastest model per stage; batch size 4; device cpu")


def test_display_names():
    assert display_name("MCFCN") == "MC-FCN"
    assert display_name("FPN") == "FPN"
