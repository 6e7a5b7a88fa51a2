"""Evaluation metrics, report files and run comparison.

Average class accuracy (the mean of the row-normalized confusion
diagonal) is the headline number: under imbalance, overall accuracy
rewards predicting the majority class and hides minority collapse.

Report files are deterministic: repeat runs with the same config and
seed produce byte-identical report.txt / metrics.csv / confusion.csv.
Wall-clock timing therefore lives in the epoch history, never here.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cost_adapt import ConfusionMatrix, confusion_matrix
from .data import LabeledDataset
from .errors import ConfigError, ParseError
from .network import Network, predict_batch


@dataclass(frozen=True)
class MetricsReport:
    overall_accuracy: float
    per_class_accuracy: np.ndarray
    average_class_accuracy: float
    confusion: ConfusionMatrix
    n_test: int
    fingerprint: str
    label: str = ""


def dataset_fingerprint(ds: LabeledDataset) -> str:
    """Hash of the sample identity (source indices + labels) of a dataset."""
    source = ds.meta.get("source_indices")
    if source is None:
        source = np.arange(ds.n_samples, dtype=np.int64)
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(source, dtype=np.int64).tobytes())
    digest.update(np.ascontiguousarray(ds.labels, dtype=np.int64).tobytes())
    return digest.hexdigest()


def evaluate(net: Network, test: LabeledDataset, label: str = "") -> MetricsReport:
    """Score a trained network on a held-out set."""
    if test.n_samples == 0:
        raise ConfigError("cannot evaluate on an empty test set")
    preds = predict_batch(net, test.features)
    confusion = confusion_matrix(test.labels, preds, test.n_classes)
    per_class = np.diag(confusion.row_normalized).copy()
    overall = float(np.trace(confusion.counts) / test.n_samples)
    return MetricsReport(
        overall_accuracy=overall,
        per_class_accuracy=per_class,
        average_class_accuracy=float(per_class.mean()),
        confusion=confusion,
        n_test=test.n_samples,
        fingerprint=dataset_fingerprint(test),
        label=label,
    )


def compare_runs(reports) -> list[dict]:
    """Rank reports by average class accuracy (desc), ties by overall.

    All reports must score the same test set; mismatched fingerprints
    raise ConfigError. Values are copied from the reports untouched.
    """
    reports = list(reports)
    if not reports:
        raise ConfigError("nothing to compare")
    fingerprints = {r.fingerprint for r in reports}
    if len(fingerprints) > 1:
        raise ConfigError(
            "reports evaluate different test sets; refusing to rank them"
        )
    rows = [
        {
            "label": r.label,
            "average_class_accuracy": r.average_class_accuracy,
            "overall_accuracy": r.overall_accuracy,
            "per_class_accuracy": list(r.per_class_accuracy),
        }
        for r in reports
    ]
    rows.sort(
        key=lambda row: (-row["average_class_accuracy"], -row["overall_accuracy"])
    )
    return rows


def format_comparison(rows) -> str:
    lines = [f"{'label':<24} {'avg-class':>10} {'overall':>10}  per-class"]
    for row in rows:
        per_class = " ".join(f"{v:.4f}" for v in row["per_class_accuracy"])
        lines.append(
            f"{row['label']:<24} {row['average_class_accuracy']:>10.4f} "
            f"{row['overall_accuracy']:>10.4f}  {per_class}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Files. report.txt is for people; metrics.csv and confusion.csv are the
# machine-readable siblings (metrics.csv round-trips exactly via repr).


def report_text(report: MetricsReport) -> str:
    lines = [
        f"label: {report.label}",
        f"n_test: {report.n_test}",
        f"test_fingerprint: {report.fingerprint}",
        f"overall_accuracy: {report.overall_accuracy:.6f}",
        f"average_class_accuracy: {report.average_class_accuracy:.6f}",
    ]
    for c, acc in enumerate(report.per_class_accuracy):
        lines.append(f"class_{c}_accuracy: {acc:.6f}")
    return "\n".join(lines) + "\n"


def save_report(report: MetricsReport, directory) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    report_path = directory / "report.txt"
    report_path.write_text(report_text(report))

    metrics_path = directory / "metrics.csv"
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "value"])
        writer.writerow(["label", report.label])
        writer.writerow(["n_test", report.n_test])
        writer.writerow(["test_fingerprint", report.fingerprint])
        writer.writerow(["overall_accuracy", repr(report.overall_accuracy)])
        writer.writerow(
            ["average_class_accuracy", repr(report.average_class_accuracy)]
        )
        for c, acc in enumerate(report.per_class_accuracy):
            writer.writerow([f"class_{c}_accuracy", repr(float(acc))])

    confusion_path = directory / "confusion.csv"
    with open(confusion_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred"] + [f"pred_{c}" for c in
                                          range(report.confusion.counts.shape[1])])
        for c, row in enumerate(report.confusion.counts):
            writer.writerow([f"true_{c}"] + [int(v) for v in row])

    return {"report": report_path, "metrics": metrics_path,
            "confusion": confusion_path}


def load_report(directory) -> MetricsReport:
    """Rebuild a MetricsReport from metrics.csv + confusion.csv."""
    directory = Path(directory)
    metrics_path = directory / "metrics.csv"
    if not metrics_path.exists():
        raise ParseError(f"{metrics_path}: not found")
    values: dict[str, str] = {}
    with open(metrics_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["key", "value"]:
            raise ParseError(f"{metrics_path}: unexpected header {header}")
        for row in reader:
            if len(row) != 2:
                raise ParseError(f"{metrics_path}: malformed row {row}")
            values[row[0]] = row[1]

    confusion_path = directory / "confusion.csv"
    counts_rows = []
    with open(confusion_path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for row in reader:
            counts_rows.append([int(v) for v in row[1:]])
    counts = np.asarray(counts_rows, dtype=np.int64)
    n_classes = counts.shape[0]
    confusion = ConfusionMatrix(
        counts,
        *_normalize_counts(counts),
    )

    per_class = np.array(
        [float(values[f"class_{c}_accuracy"]) for c in range(n_classes)]
    )
    return MetricsReport(
        overall_accuracy=float(values["overall_accuracy"]),
        per_class_accuracy=per_class,
        average_class_accuracy=float(values["average_class_accuracy"]),
        confusion=confusion,
        n_test=int(values["n_test"]),
        fingerprint=values["test_fingerprint"],
        label=values.get("label", ""),
    )


def _normalize_counts(counts: np.ndarray):
    row_sums = counts.sum(axis=1)
    degenerate = tuple(int(c) for c in np.flatnonzero(row_sums == 0))
    safe = np.where(row_sums == 0, 1, row_sums)
    normalized = counts / safe[:, None]
    for c in degenerate:
        normalized[c] = 1.0 / counts.shape[0]
    return normalized, degenerate
