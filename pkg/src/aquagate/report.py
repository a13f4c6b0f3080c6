"""Run/bias report serialization, ablation tables, and SVG scatter plots.

Reports embed the full configuration and seeds; every aggregate is
recomputable from the per-image records and is verified on load. JSON
keeps full float precision so round trips are byte-identical; the CSV
export renders floats at 6 decimals. NaN is never written.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from .audit import BiasReport
from .embeddings import CONDITIONS
from .enhance import RunRecord
from .errors import EmptyInputError, IoError, ManifestMismatchError, ParseError
from .projection import TsneLayout
from .quality import MetricSet, _METRIC_FIELDS

SCHEMA_VERSION = 1

CSV_HEADER = "id,decision,clarity,depth_units,savings,psnr,ssim,uiqm,uciqe,fsim,uncertainty,flagged"

#: Fig-2 color assignment for the three benchmark datasets.
DATASET_COLORS = {"LSUI400": "red", "UIEB100": "blue", "Ocean_ex": "green"}
_EXTRA_PALETTE = ("orange", "purple", "teal", "brown", "magenta", "olive", "navy", "gray")


@dataclass
class RunReport:
    config: dict
    records: list[RunRecord]
    aggregates: dict
    schema_version: int = SCHEMA_VERSION


def _require_finite(value, context: str):
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError(f"non-finite value in {context}")


def _metric_means(sets: Sequence[MetricSet]) -> dict | None:
    if not sets:
        return None
    out = {}
    for name in _METRIC_FIELDS:
        out[name] = sum(getattr(s, name) for s in sets) / len(sets)
    return out


def compute_aggregates(records: Sequence[RunRecord]) -> dict:
    """Aggregate view recomputable from the records alone."""
    ok = [r for r in records if r.decision != "error"]
    skipped = [r for r in ok if r.decision == "skip"]
    total_units = sum(r.cost_units for r in ok)
    total_full = sum(r.full_units for r in ok)
    with_metrics = [r for r in ok if r.metrics is not None]

    by_dataset: dict = {}
    for label in sorted({r.dataset_label for r in ok}):
        rows = [r for r in ok if r.dataset_label == label]
        rows_m = [r.metrics for r in rows if r.metrics is not None]
        by_dataset[label] = {
            "n": len(rows),
            "skipped": sum(1 for r in rows if r.decision == "skip"),
            "skip_fraction": (
                sum(1 for r in rows if r.decision == "skip") / len(rows) if rows else 0.0
            ),
            "metric_means": _metric_means(rows_m),
        }

    return {
        "n": len(records),
        "processed": len(ok),
        "failed": len(records) - len(ok),
        "skipped": len(skipped),
        "skip_fraction": len(skipped) / len(ok) if ok else 0.0,
        "unit_savings": 1.0 - total_units / total_full if total_full > 0 else 0.0,
        "flagged": sum(1 for r in ok if r.flagged),
        "metric_means": _metric_means([r.metrics for r in with_metrics]),
        "metric_means_enhanced": _metric_means(
            [r.metrics for r in with_metrics if r.decision == "enhance"]
        ),
        "metric_means_skipped": _metric_means(
            [r.metrics for r in with_metrics if r.decision == "skip"]
        ),
        "by_dataset": by_dataset,
    }


def make_run_report(records: Sequence[RunRecord], config: Mapping) -> RunReport:
    if not records:
        raise EmptyInputError("no records to report")
    return RunReport(
        config=dict(config),
        records=list(records),
        aggregates=compute_aggregates(records),
    )


def _record_to_json(r: RunRecord) -> dict:
    out = {
        "id": r.id,
        "dataset": r.dataset_label,
        "decision": r.decision,
        "clarity": r.clarity,
        "threshold": r.threshold,
        "cost_units": r.cost_units,
        "full_units": r.full_units,
        "output_path": r.output_path,
        "metrics": r.metrics.as_dict() if r.metrics is not None else None,
        "uncertainty": r.uncertainty,
        "flagged": r.flagged,
        "uncertainty_scale": r.uncertainty_scale,
        "error": r.error,
    }
    for key, value in out.items():
        _require_finite(value, f"record {r.id} field {key}")
    if r.metrics is not None:
        for key, value in out["metrics"].items():
            _require_finite(value, f"record {r.id} metric {key}")
    return out


def _record_from_json(obj: dict) -> RunRecord:
    metrics = obj.get("metrics")
    return RunRecord(
        id=obj["id"],
        dataset_label=obj["dataset"],
        decision=obj["decision"],
        clarity=obj["clarity"],
        threshold=obj["threshold"],
        cost_units=obj["cost_units"],
        full_units=obj["full_units"],
        output_path=obj["output_path"],
        metrics=MetricSet(**metrics) if metrics is not None else None,
        uncertainty=obj.get("uncertainty"),
        flagged=obj.get("flagged"),
        uncertainty_scale=obj.get("uncertainty_scale"),
        error=obj.get("error"),
    )


def run_report_to_json(report: RunReport) -> dict:
    return {
        "schema_version": report.schema_version,
        "config": report.config,
        "records": [_record_to_json(r) for r in report.records],
        "aggregates": report.aggregates,
    }


def write_run_report(report: RunReport, path: str | Path) -> None:
    payload = run_report_to_json(report)
    try:
        text = json.dumps(payload, indent=2, allow_nan=False) + "\n"
    except ValueError as exc:
        raise ValueError(f"refusing to serialize non-finite value: {exc}") from exc
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc


def load_run_report(path: str | Path) -> RunReport:
    """Parse a run report and verify its aggregates match recomputation."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    records = [_record_from_json(o) for o in payload["records"]]
    recomputed = compute_aggregates(records)
    if recomputed != payload["aggregates"]:
        raise ParseError(f"{path}: stored aggregates do not match records")
    return RunReport(
        config=payload["config"],
        records=records,
        aggregates=payload["aggregates"],
        schema_version=payload["schema_version"],
    )


def _csv_float(value: float | None) -> str:
    if value is None:
        return ""
    if not math.isfinite(value):
        raise ValueError("refusing to serialize non-finite value to CSV")
    return f"{value:.6f}"


def write_csv(records: Sequence[RunRecord], path: str | Path) -> None:
    if not records:
        raise EmptyInputError("no records to write")
    lines = [CSV_HEADER]
    for r in records:
        savings = 1.0 - r.cost_units / r.full_units if r.full_units > 0 else None
        m = r.metrics
        lines.append(
            ",".join(
                [
                    r.id,
                    r.decision,
                    _csv_float(r.clarity),
                    _csv_float(r.cost_units),
                    _csv_float(savings),
                    _csv_float(m.psnr_db if m else None),
                    _csv_float(m.ssim if m else None),
                    _csv_float(m.uiqm if m else None),
                    _csv_float(m.uciqe if m else None),
                    _csv_float(m.fsim if m else None),
                    _csv_float(r.uncertainty),
                    "" if r.flagged is None else str(r.flagged).lower(),
                ]
            )
        )
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc


def ablation_table(
    gated: RunReport,
    full: RunReport,
    reference_drops: Mapping[str, float] | None = None,
) -> dict:
    """Per-dataset comparison of a gated run against a full run.

    Both runs must cover the same manifest. ``reference_drops`` attaches
    externally reported PSNR-drop percentages to print beside the
    recomputed ones.
    """
    key = lambda rep: [(r.id, r.dataset_label) for r in rep.records]
    if key(gated) != key(full):
        raise ManifestMismatchError("gated and full runs cover different manifests")
    reference_drops = dict(reference_drops or {})

    rows = []
    labels = sorted({r.dataset_label for r in gated.records})
    for label in labels:
        g_rows = [r for r in gated.records if r.dataset_label == label and r.decision != "error"]
        f_rows = [r for r in full.records if r.dataset_label == label and r.decision != "error"]
        g_m = _metric_means([r.metrics for r in g_rows if r.metrics is not None])
        f_m = _metric_means([r.metrics for r in f_rows if r.metrics is not None])
        g_skip = sum(1 for r in g_rows if r.decision == "skip")
        f_skip = sum(1 for r in f_rows if r.decision == "skip")
        psnr_with = g_m["psnr_db"] if g_m else None
        psnr_without = f_m["psnr_db"] if f_m else None
        drop = None
        if psnr_with is not None and psnr_without not in (None, 0.0):
            drop = (psnr_without - psnr_with) / psnr_without * 100.0
        rows.append(
            {
                "dataset": label,
                "psnr_without": psnr_without,
                "ssim_without": f_m["ssim"] if f_m else None,
                "savings_without_pct": 100.0 * f_skip / len(f_rows) if f_rows else 0.0,
                "psnr_with": psnr_with,
                "ssim_with": g_m["ssim"] if g_m else None,
                "savings_with_pct": 100.0 * g_skip / len(g_rows) if g_rows else 0.0,
                "psnr_drop_pct": drop,
                "reference_drop_pct": reference_drops.get(label),
            }
        )
    return {"schema_version": SCHEMA_VERSION, "rows": rows}


def render_ablation_table(table: dict) -> str:
    def fmt(v, nd=3):
        return "-" if v is None else f"{v:.{nd}f}"

    lines = [
        f"{'Dataset':<12}{'Method':<10}{'PSNR':>8}{'SSIM':>8}{'Savings%':>10}",
    ]
    for row in table["rows"]:
        lines.append(
            f"{row['dataset']:<12}{'full':<10}{fmt(row['psnr_without']):>8}"
            f"{fmt(row['ssim_without']):>8}{fmt(row['savings_without_pct'], 2):>10}"
        )
        lines.append(
            f"{'':<12}{'gated':<10}{fmt(row['psnr_with']):>8}"
            f"{fmt(row['ssim_with']):>8}{fmt(row['savings_with_pct'], 2):>10}"
        )
        drop = f"psnr drop: {fmt(row['psnr_drop_pct'], 2)}%"
        if row.get("reference_drop_pct") is not None:
            drop += f" (reported reference: {row['reference_drop_pct']:.2f}%)"
        lines.append(f"{'':<12}{drop}")
    return "\n".join(lines) + "\n"


def render_metric_table(rows: Mapping[str, Mapping[str, float] | None]) -> str:
    """Comparison-table text: one row per name, five metric columns."""
    lines = [f"{'Model':<20}{'SSIM':>8}{'PSNR':>8}{'UIQM':>8}{'UCIQE':>8}{'FSIM':>8}"]
    for name in sorted(rows):
        means = rows[name]
        if means is None:
            lines.append(f"{name:<20}{'-':>8}{'-':>8}{'-':>8}{'-':>8}{'-':>8}")
            continue
        lines.append(
            f"{name:<20}{means['ssim']:>8.3f}{means['psnr_db']:>8.3f}"
            f"{means['uiqm']:>8.3f}{means['uciqe']:>8.3f}{means['fsim']:>8.3f}"
        )
    return "\n".join(lines) + "\n"


def dataset_color(label: str, all_labels: Sequence[str]) -> str:
    if label in DATASET_COLORS:
        return DATASET_COLORS[label]
    extras = [l for l in sorted(set(all_labels)) if l not in DATASET_COLORS]
    return _EXTRA_PALETTE[extras.index(label) % len(_EXTRA_PALETTE)]


def plot_tsne_svg(
    layout: TsneLayout, labels: Sequence[str], path: str | Path,
    width: int = 640, height: int = 480,
) -> None:
    """Scatter plot of a 2-D layout, one color per dataset label, with legend."""
    coords = layout.coords
    if coords.shape[0] == 0:
        raise EmptyInputError("empty layout")
    if len(labels) != coords.shape[0]:
        raise ValueError(f"{len(labels)} labels for {coords.shape[0]} points")
    margin = 40.0
    xs, ys = coords[:, 0], coords[:, 1]
    span_x = float(xs.max() - xs.min()) or 1.0
    span_y = float(ys.max() - ys.min()) or 1.0
    px = margin + (xs - xs.min()) / span_x * (width - 2 * margin)
    py = margin + (ys - ys.min()) / span_y * (height - 2 * margin)

    unique = sorted(set(labels))
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for x, y, label in zip(px, py, labels):
        color = dataset_color(label, unique)
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}"/>')
    for i, label in enumerate(unique):
        color = dataset_color(label, unique)
        ly = 20 + 18 * i
        parts.append(f'<rect x="{width - 150}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(
            f'<text x="{width - 134}" y="{ly}" font-family="sans-serif" font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text("\n".join(parts) + "\n")
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc


def write_tsne_csv(
    layout: TsneLayout, ids: Sequence[str], labels: Sequence[str], path: str | Path
) -> None:
    if not (len(ids) == len(labels) == layout.coords.shape[0]):
        raise ValueError("ids, labels, and coords must align")
    lines = ["id,x,y,dataset"]
    for i, (id_, label) in enumerate(zip(ids, labels)):
        lines.append(
            f"{id_},{layout.coords[i, 0]:.6f},{layout.coords[i, 1]:.6f},{label}"
        )
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc


def bias_report_to_json(
    report: BiasReport, clusters: int, seed: int, tsne_params: dict | None = None
) -> dict:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "entropy_nats": report.entropy_nats,
        "normalized_entropy": report.normalized_entropy,
        "cluster_counts": list(report.cluster_counts),
        "prompt_means": {
            label: {cond: means[i] for i, cond in enumerate(CONDITIONS)}
            for label, means in sorted(report.prompt_means.items())
        },
        "weights": [float(w) for w in report.weights.w],
        "metadata": {
            "clusters": clusters,
            "seed": seed,
            "prompt_score_aggregation": "mean",
            "tsne": tsne_params,
        },
    }
    return payload


def write_bias_report(payload: dict, path: str | Path) -> None:
    try:
        text = json.dumps(payload, indent=2, allow_nan=False) + "\n"
    except ValueError as exc:
        raise ValueError(f"refusing to serialize non-finite value: {exc}") from exc
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc
