"""Threshold fitting, window classification and evaluation metrics.

The detection threshold is the 95th percentile of the reconstruction
errors the trained model produces on its own training windows, computed
with the linear-interpolation percentile definition (fixed explicitly so
the value is reproducible across ecosystems).  A window is anomalous iff
its error is strictly above the threshold; ties classify as normal.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

THRESHOLD_METHOD = "p95-linear-interp"
_PERCENTILE = 0.95
_MIN_SAMPLES = 20


@dataclass(frozen=True)
class Threshold:
    tau: float
    method: str = THRESHOLD_METHOD
    source_error_count: int = 0

    def __post_init__(self):
        if self.tau < 0 or not math.isfinite(self.tau):
            raise ValueError(f"tau must be finite and >= 0, got {self.tau}")

    def to_dict(self) -> dict:
        return {"tau": self.tau, "method": self.method, "source_error_count": self.source_error_count}

    @classmethod
    def from_dict(cls, raw: dict) -> "Threshold":
        return cls(tau=raw["tau"], method=raw["method"], source_error_count=raw["source_error_count"])


def fit_threshold(training_errors) -> Threshold:
    """95th percentile of training errors, linear interpolation between
    order statistics: tau = e_[k] + frac * (e_[k+1] - e_[k]) at
    position 0.95 * (n - 1)."""
    errors = np.asarray(training_errors, dtype=np.float64)
    if errors.ndim != 1 or len(errors) < _MIN_SAMPLES:
        raise ValueError(f"need at least {_MIN_SAMPLES} errors, got {errors.shape}")
    if np.any(errors < 0) or not np.isfinite(errors).all():
        raise ValueError("errors must be finite and non-negative")
    ranked = np.sort(errors)
    position = _PERCENTILE * (len(ranked) - 1)
    k = int(math.floor(position))
    frac = position - k
    tau = ranked[k] if frac == 0.0 else ranked[k] + frac * (ranked[k + 1] - ranked[k])
    return Threshold(tau=float(tau), source_error_count=len(ranked))


def classify(error: float, threshold: Threshold) -> int:
    """1 iff the error is strictly above the threshold."""
    if not math.isfinite(error):
        raise ValueError(f"error must be finite, got {error}")
    return int(error > threshold.tau)


def classify_batch(errors: np.ndarray, threshold: Threshold) -> np.ndarray:
    errors = np.asarray(errors, dtype=np.float64)
    if not np.isfinite(errors).all():
        raise ValueError("errors must be finite")
    return (errors > threshold.tau).astype(np.int8)


@dataclass
class DetectionReport:
    """Per-scenario confusion counts and derived metrics."""

    scenario: str
    threshold: float
    errors: np.ndarray
    flags: np.ndarray
    labels: np.ndarray
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float

    def row(self) -> dict:
        return {
            "scenario": self.scenario,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "threshold": self.threshold,
        }


def precision_recall_f1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Standard definitions; zero denominators yield 0 (keeps reports numeric)."""
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def evaluate(
    flags,
    labels,
    scenario_name: str,
    errors=None,
    threshold: Threshold | None = None,
) -> DetectionReport:
    """Confusion matrix and precision/recall/F1 of flags against labels."""
    flags = np.asarray(flags, dtype=np.int8)
    labels = np.asarray(labels, dtype=np.int8)
    if flags.shape != labels.shape or flags.ndim != 1:
        raise ValueError(f"flags {flags.shape} and labels {labels.shape} must be equal-length vectors")
    if len(flags) == 0:
        raise ValueError("nothing to evaluate")

    tp = int(np.sum((flags == 1) & (labels == 1)))
    fp = int(np.sum((flags == 1) & (labels == 0)))
    tn = int(np.sum((flags == 0) & (labels == 0)))
    fn = int(np.sum((flags == 0) & (labels == 1)))
    precision, recall, f1 = precision_recall_f1(tp, fp, fn)

    return DetectionReport(
        scenario=scenario_name,
        threshold=threshold.tau if threshold is not None else float("nan"),
        errors=np.asarray(errors, dtype=np.float64) if errors is not None else np.array([]),
        flags=flags,
        labels=labels,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=f1,
    )


def error_histogram(errors, threshold: Threshold, bins: int = 50) -> dict:
    """Histogram of reconstruction errors with the threshold marker.

    Returns bin edges/counts plus tau, ready to serialize for plotting.
    """
    errors = np.asarray(errors, dtype=np.float64)
    if len(errors) == 0:
        raise ValueError("errors must be non-empty")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    counts, edges = np.histogram(errors, bins=bins)
    return {
        "bin_left": edges[:-1].tolist(),
        "bin_right": edges[1:].tolist(),
        "count": counts.tolist(),
        "threshold": threshold.tau,
    }


# ── Report serialization ─────────────────────────────────────────────────

REPORT_FIELDS = ("scenario", "precision", "recall", "f1", "tp", "fp", "tn", "fn", "threshold")


def write_report_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        writer.writeheader()
        for report in reports:
            writer.writerow({k: _fmt(v) for k, v in report.row().items()})


def write_report_json(reports, path) -> None:
    with open(path, "w") as fh:
        json.dump([r.row() for r in reports], fh, indent=2)


def write_histogram_csv(hist: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "count"])
        for left, right, count in zip(hist["bin_left"], hist["bin_right"], hist["count"]):
            writer.writerow([repr(left), repr(right), count])


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.6f}"
    return value
