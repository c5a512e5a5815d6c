"""Report emission: delimited data (CSV/JSON) plus rendered figures.

CSV and JSON outputs are byte-deterministic for identical inputs (sorted
JSON keys, repr-formatted floats, no timestamps).  Figures are rendered
with matplotlib to PNG by default or SVG on request; SVG output strips
the date metadata so reruns stay comparable.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .classifier import EvaluationReport, RankSweepResult, select_rank
from .imgio import DatasetItem
from .linalg import NormKind

SWEEP_CSV_HEADER = ("norm", "rank", "p_classA", "p_classB", "p_avg")
EVAL_CSV_HEADER = ("file", "true", "predicted", "error_classA", "error_classB")


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_sweep_csv(path, sweeps: dict[NormKind, RankSweepResult]) -> Path:
    """One row per (norm, rank): the prediction-probability curves."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_HEADER)
        for norm, sweep in sweeps.items():
            p_avg = sweep.p_avg
            for i, rank in enumerate(sweep.ranks):
                writer.writerow(
                    [
                        norm.value,
                        int(rank),
                        repr(float(sweep.probabilities[0, i])),
                        repr(float(sweep.probabilities[1, i])),
                        repr(float(p_avg[i])),
                    ]
                )
    return path


def write_predictions_csv(path, report: EvaluationReport) -> Path:
    """One row per evaluated image with both reconstruction errors."""
    first, second = report.class_labels
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVAL_CSV_HEADER)
        for rec in report.records:
            writer.writerow(
                [
                    rec.name,
                    rec.true_label,
                    rec.predicted,
                    repr(rec.errors[first]),
                    repr(rec.errors[second]),
                ]
            )
    return path


def _save(fig, path: Path, figure_format: str) -> Path:
    out = path.with_suffix(f".{figure_format}")
    kwargs = {"metadata": {"Date": None}} if figure_format == "svg" else {}
    fig.savefig(out, dpi=120, **kwargs)
    plt.close(fig)
    return out


def plot_sweep_curves(path, sweeps: dict[NormKind, RankSweepResult], figure_format: str = "png") -> Path:
    """Prediction probability vs rank, one panel per norm."""
    n = len(sweeps)
    ncols = 2 if n > 1 else 1
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(5.5 * ncols, 3.6 * nrows), squeeze=False)
    flat = axes.ravel()
    for ax, (norm, sweep) in zip(flat, sweeps.items()):
        first, second = sweep.class_labels
        ax.plot(sweep.ranks, sweep.probabilities[0], label=first, color="tab:green")
        ax.plot(sweep.ranks, sweep.probabilities[1], label=second, color="tab:orange")
        ax.plot(sweep.ranks, sweep.p_avg, label="average", color="black", linewidth=2)
        best = select_rank(sweep)
        ax.axvline(best, color="gray", linestyle=":", linewidth=1)
        ax.set_title(f"{norm.value} norm (best rank {best})")
        ax.set_xlabel("rank")
        ax.set_ylabel("prediction probability")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(fontsize=8)
    for ax in flat[n:]:
        ax.set_visible(False)
    fig.tight_layout()
    return _save(fig, Path(path), figure_format)


def plot_norm_metrics(path, per_norm: dict[str, dict], class_labels: Sequence[str], figure_format: str = "png") -> Path:
    """Grouped bars of recall / false-positive rate / accuracy per norm."""
    norms = list(per_norm)
    first, second = class_labels
    metric_keys = [
        (f"TP recall {first}", lambda m: m["recall"][first]),
        (f"TP recall {second}", lambda m: m["recall"][second]),
        (f"FP rate {first}", lambda m: m["fp_rate"][first]),
        (f"FP rate {second}", lambda m: m["fp_rate"][second]),
        ("accuracy", lambda m: m["accuracy"]),
    ]
    x = np.arange(len(norms))
    width = 0.8 / len(metric_keys)
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(norms), 4.0))
    for i, (name, getter) in enumerate(metric_keys):
        values = [getter(per_norm[n]) for n in norms]
        ax.bar(x + (i - (len(metric_keys) - 1) / 2) * width, values, width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels([f"{n}\n(rank {per_norm[n]['best_rank']})" for n in norms])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("metric value")
    ax.set_title("training metrics per norm at its best rank")
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    return _save(fig, Path(path), figure_format)


def plot_error_scatter(path, report: EvaluationReport, figure_format: str = "png") -> Path:
    """Per-image error pairs; the diagonal is the decision boundary."""
    first, second = report.class_labels
    fig, ax = plt.subplots(figsize=(5.5, 5.0))
    colors = {first: "tab:green", second: "tab:orange"}
    for label in report.class_labels:
        xs = [r.errors[first] for r in report.records if r.true_label == label]
        ys = [r.errors[second] for r in report.records if r.true_label == label]
        ax.scatter(xs, ys, s=18, alpha=0.8, color=colors[label], label=f"true {label}")
    all_errs = [e for r in report.records for e in r.errors.values()]
    lim = max(all_errs) * 1.05 if all_errs else 1.0
    ax.plot([0, lim], [0, lim], color="gray", linestyle="--", linewidth=1, label="tie line")
    ax.set_xlim(0, lim)
    ax.set_ylim(0, lim)
    ax.set_xlabel(f"error vs {first} template")
    ax.set_ylabel(f"error vs {second} template")
    ax.set_title(f"reconstruction errors ({report.accuracy:.1%} accurate)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(path), figure_format)


def plot_confusion_matrix(path, report: EvaluationReport, figure_format: str = "png") -> Path:
    counts = np.asarray(report.confusion)
    fig, ax = plt.subplots(figsize=(4.4, 4.0))
    im = ax.imshow(counts, cmap="Blues")
    for (i, j), value in np.ndenumerate(counts):
        color = "white" if value > counts.max() / 2 else "black"
        ax.text(j, i, str(int(value)), ha="center", va="center", color=color)
    ax.set_xticks((0, 1))
    ax.set_yticks((0, 1))
    ax.set_xticklabels(report.class_labels)
    ax.set_yticklabels(report.class_labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(f"confusion matrix (accuracy {report.accuracy:.1%})")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    return _save(fig, Path(path), figure_format)


def plot_templates(
    path, templates_by_method: dict[str, dict[str, np.ndarray]], figure_format: str = "png"
) -> Path:
    """Gallery of class templates, one row per construction method."""
    methods = list(templates_by_method)
    labels = sorted(next(iter(templates_by_method.values())))
    fig, axes = plt.subplots(
        len(methods), len(labels), figsize=(3.2 * len(labels), 3.2 * len(methods)), squeeze=False
    )
    for r, method in enumerate(methods):
        for c, label in enumerate(labels):
            ax = axes[r][c]
            ax.imshow(templates_by_method[method][label], cmap="gray", vmin=0.0, vmax=1.0)
            ax.set_title(f"{label} ({method})", fontsize=9)
            ax.set_xticks([])
            ax.set_yticks([])
    fig.tight_layout()
    return _save(fig, Path(path), figure_format)


def plot_annotated_grid(
    path,
    items: Sequence[DatasetItem],
    report: EvaluationReport,
    figure_format: str = "png",
    max_images: int = 16,
) -> Path:
    """Test images annotated with their predicted labels."""
    predicted = {rec.name: rec.predicted for rec in report.records}
    chosen = [it for it in items if it.name in predicted][:max_images]
    n = max(len(chosen), 1)
    ncols = min(4, n)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(2.6 * ncols, 2.9 * nrows), squeeze=False)
    flat = axes.ravel()
    for ax, item in zip(flat, chosen):
        pred = predicted[item.name]
        ok = pred == item.label
        ax.imshow(item.matrix, cmap="gray", vmin=0.0, vmax=1.0)
        ax.set_title(f"pred: {pred}", fontsize=8, color="darkgreen" if ok else "darkred")
        ax.set_xticks([])
        ax.set_yticks([])
    for ax in flat[len(chosen):]:
        ax.set_visible(False)
    fig.tight_layout()
    return _save(fig, Path(path), figure_format)
