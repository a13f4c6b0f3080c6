import json
import math
from pathlib import Path

import numpy as np
import pytest

from aquagate.enhance import RunRecord
from aquagate.errors import EmptyInputError, ManifestMismatchError, ParseError
from aquagate.projection import TsneLayout
from aquagate.quality import MetricSet
from aquagate.report import (
    CSV_HEADER,
    ablation_table,
    compute_aggregates,
    load_run_report,
    make_run_report,
    plot_tsne_svg,
    render_ablation_table,
    render_metric_table,
    write_csv,
    write_run_report,
    write_tsne_csv,
)

DATA = Path(__file__).parent / "data"


def record(
    rec_id,
    decision="enhance",
    clarity=0.3,
    psnr=25.0,
    dataset="setA",
    cost=64.0,
    full=256.0,
    **kwargs,
):
    metrics = None
    if psnr is not None:
        metrics = MetricSet(ssim=0.9, psnr_db=psnr, uiqm=1.0, uciqe=0.5, fsim=0.95)
    return RunRecord(
        id=rec_id,
        dataset_label=dataset,
        decision=decision,
        clarity=clarity,
        threshold=0.4,
        cost_units=cost if decision == "enhance" else 0.0,
        full_units=full,
        output_path=f"out/{rec_id}.png",
        metrics=metrics,
        **kwargs,
    )


def sample_records():
    return [
        record("a", "enhance", psnr=26.0),
        record("b", "skip", psnr=28.0),
        record("c", "enhance", psnr=24.0, dataset="setB"),
    ]


def test_csv_line_count_and_format(tmp_path):
    path = tmp_path / "run.csv"
    write_csv(sample_records()[:2], path)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert lines[0] == CSV_HEADER
    fields = lines[1].split(",")
    assert fields[0] == "a"
    assert fields[1] == "enhance"
    assert fields[2] == "0.300000"
    assert fields[4] == "0.750000"  # per-image unit savings
    assert fields[5] == "26.000000"


def test_csv_refuses_nan(tmp_path):
    bad = [record("a", psnr=math.nan)]
    with pytest.raises(ValueError):
        write_csv(bad, tmp_path / "run.csv")


def test_run_report_round_trip_bytes(tmp_path):
    report = make_run_report(sample_records(), {"seed": 42, "threshold": 0.4})
    path1 = tmp_path / "run.json"
    write_run_report(report, path1)
    loaded = load_run_report(path1)
    path2 = tmp_path / "run2.json"
    write_run_report(loaded, path2)
    assert path1.read_bytes() == path2.read_bytes()


def test_run_report_aggregates_verified_on_load(tmp_path):
    report = make_run_report(sample_records(), {"seed": 42})
    path = tmp_path / "run.json"
    write_run_report(report, path)
    payload = json.loads(path.read_text())
    payload["aggregates"]["skip_fraction"] = 0.9
    path.write_text(json.dumps(payload, indent=2) + "\n")
    with pytest.raises(ParseError):
        load_run_report(path)


def test_run_report_refuses_nan(tmp_path):
    report = make_run_report(sample_records(), {"seed": 42})
    report.records[0].clarity = math.nan
    with pytest.raises(ValueError):
        write_run_report(report, tmp_path / "run.json")


def test_aggregates_fields():
    agg = compute_aggregates(sample_records())
    assert agg["n"] == 3
    assert agg["skipped"] == 1
    assert agg["skip_fraction"] == pytest.approx(1 / 3)
    assert agg["metric_means"]["psnr_db"] == pytest.approx(26.0)
    assert agg["by_dataset"]["setA"]["n"] == 2
    assert agg["unit_savings"] == pytest.approx(1 - 128 / 768)


def test_aggregates_ignore_failed_records():
    records = sample_records() + [
        RunRecord(
            id="bad",
            dataset_label="setA",
            decision="error",
            clarity=None,
            threshold=0.4,
            cost_units=0.0,
            full_units=0.0,
            output_path=None,
            error="DecodeError: x",
        )
    ]
    agg = compute_aggregates(records)
    assert agg["n"] == 4
    assert agg["processed"] == 3
    assert agg["failed"] == 1
    assert agg["skip_fraction"] == pytest.approx(1 / 3)


def test_make_report_requires_records():
    with pytest.raises(EmptyInputError):
        make_run_report([], {})


def _reports_for_ablation():
    gated_records = [
        record("a", "enhance", psnr=26.0),
        record("b", "skip", psnr=27.0),
        record("c", "enhance", psnr=25.8),
        record("d", "skip", psnr=27.4),
    ]
    full_records = [
        record("a", "enhance", psnr=27.1),
        record("b", "enhance", psnr=27.5),
        record("c", "enhance", psnr=26.9),
        record("d", "enhance", psnr=27.7),
    ]
    gated = make_run_report(gated_records, {"threshold": 0.4})
    full = make_run_report(full_records, {"threshold": 1.5})
    return gated, full


def test_ablation_savings_and_drop():
    gated, full = _reports_for_ablation()
    table = ablation_table(gated, full)
    row = table["rows"][0]
    assert row["savings_with_pct"] == pytest.approx(50.0)
    assert row["savings_without_pct"] == 0.0
    expected_drop = (row["psnr_without"] - row["psnr_with"]) / row["psnr_without"] * 100
    assert row["psnr_drop_pct"] == pytest.approx(expected_drop)


def test_ablation_identical_runs_zero_savings():
    _, full = _reports_for_ablation()
    table = ablation_table(full, full)
    row = table["rows"][0]
    assert row["savings_with_pct"] == 0.0
    assert row["psnr_with"] == row["psnr_without"]
    assert row["psnr_drop_pct"] == pytest.approx(0.0)


def test_ablation_reference_drop_rendering():
    gated, full = _reports_for_ablation()
    table = ablation_table(gated, full, reference_drops={"setA": 3.89})
    text = render_ablation_table(table)
    assert "reported reference: 3.89%" in text
    assert "psnr drop:" in text


def test_ablation_manifest_mismatch():
    gated, full = _reports_for_ablation()
    other = make_run_report([record("zzz")], {})
    with pytest.raises(ManifestMismatchError):
        ablation_table(gated, other)


def test_ablation_published_row_format():
    # Rows shaped like the published with/without comparison render at
    # 3 decimals for metrics and 2 for savings.
    gated_records = [
        record(f"g{i}", "skip" if i < 3 else "enhance", psnr=26.40, dataset="LSUI400")
        for i in range(16)
    ]
    full_records = [
        record(f"g{i}", "enhance", psnr=27.20, dataset="LSUI400") for i in range(16)
    ]
    for r in gated_records:
        r.metrics = MetricSet(ssim=0.869, psnr_db=26.40, uiqm=0.715, uciqe=0.585, fsim=0.931)
    for r in full_records:
        r.metrics = MetricSet(ssim=0.879, psnr_db=27.20, uiqm=0.705, uciqe=0.589, fsim=0.911)
    table = ablation_table(
        make_run_report(gated_records, {}), make_run_report(full_records, {})
    )
    text = render_ablation_table(table)
    assert "27.200" in text and "26.400" in text
    assert "0.879" in text and "0.869" in text
    assert "18.75" in text  # 3 of 16 skipped
    drop = table["rows"][0]["psnr_drop_pct"]
    assert drop == pytest.approx((27.20 - 26.40) / 27.20 * 100)


def test_render_metric_table_columns():
    text = render_metric_table(
        {"WaterNet": {"ssim": 0.843, "psnr_db": 21.744, "uiqm": 1.087, "uciqe": 0.566, "fsim": 0.908}}
    )
    assert "WaterNet" in text
    assert "0.843" in text and "21.744" in text


def _layout():
    rng = np.random.default_rng(5)
    return TsneLayout(
        coords=rng.standard_normal((12, 2)) * 10,
        final_kl=0.5,
        kl_after_exaggeration=1.0,
        seed=5,
        perplexity=3.0,
        iterations=10,
    )


def test_svg_matches_golden(tmp_path):
    labels = ["LSUI400"] * 4 + ["UIEB100"] * 4 + ["Ocean_ex"] * 4
    path = tmp_path / "t.svg"
    plot_tsne_svg(_layout(), labels, path)
    assert path.read_bytes() == (DATA / "tsne_golden.svg").read_bytes()


def test_svg_colors_and_legend(tmp_path):
    labels = ["LSUI400"] * 4 + ["UIEB100"] * 4 + ["Ocean_ex"] * 4
    path = tmp_path / "t.svg"
    plot_tsne_svg(_layout(), labels, path)
    text = path.read_text()
    assert 'fill="red"' in text and 'fill="blue"' in text and 'fill="green"' in text
    assert text.count("<text") == 3
    assert text.startswith('<?xml version="1.0"')


def test_svg_empty_layout_rejected(tmp_path):
    layout = _layout()
    with pytest.raises(ValueError):
        plot_tsne_svg(layout, ["only"], tmp_path / "t.svg")


def test_tsne_csv(tmp_path):
    layout = _layout()
    ids = [f"i{k}" for k in range(12)]
    labels = ["LSUI400"] * 12
    write_tsne_csv(layout, ids, labels, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "id,x,y,dataset"
    assert len(lines) == 13
    assert lines[1].startswith("i0,")
