"""Threshold fitting, classification rule, metrics, histograms."""

import numpy as np
import pytest

from ecids.detection import (
    REPORT_FIELDS,
    Threshold,
    classify,
    classify_batch,
    error_histogram,
    evaluate,
    fit_threshold,
    precision_recall_f1,
    write_report_csv,
)

# Fixed (precision, recall, F1) reference rows used as self-consistency
# vectors for the metric implementation.
REFERENCE_ROWS = {
    "PA x2": (0.6490, 0.1317, 0.2189),
    "PA x5": (0.8505, 0.4086, 0.5520),
    "DoS": (0.9240, 0.9507, 0.9372),
    "PI-1": (0.9280, 0.9660, 0.9466),
    "PI-2": (0.9286, 0.9693, 0.9485),
    "PI-5": (0.9295, 0.9739, 0.9512),
    "LR x0": (0.9103, 0.7469, 0.8205),
    "LR x0.5": (0.8883, 0.5709, 0.6951),
    "LI x2": (0.9249, 0.8705, 0.8969),
    "LI x5": (0.9314, 0.9896, 0.9596),
}


# ── Threshold ─────────────────────────────────────────────────────────────


def test_threshold_of_1_to_100_is_95_05():
    errors = np.arange(1.0, 101.0)
    th = fit_threshold(errors)
    assert th.tau == pytest.approx(95.05, abs=1e-12)
    assert th.method == "p95-linear-interp"
    assert th.source_error_count == 100


def test_threshold_matches_numpy_linear_percentile():
    rng = np.random.default_rng(0)
    for _ in range(20):
        errors = rng.gamma(2.0, 1.0, size=rng.integers(20, 400))
        assert fit_threshold(errors).tau == pytest.approx(
            np.percentile(errors, 95, method="linear"), rel=1e-12
        )


def test_threshold_of_constant_errors_is_that_constant():
    th = fit_threshold(np.full(50, 3.25))
    assert th.tau == 3.25


def test_threshold_needs_at_least_20_samples():
    with pytest.raises(ValueError, match="at least 20"):
        fit_threshold(np.ones(19))


def test_threshold_rejects_negative_or_non_finite():
    with pytest.raises(ValueError):
        fit_threshold(np.concatenate([np.ones(30), [-1.0]]))
    with pytest.raises(ValueError):
        fit_threshold(np.concatenate([np.ones(30), [np.inf]]))


def test_fraction_above_threshold_is_at_most_5pct_plus_one():
    rng = np.random.default_rng(1)
    for _ in range(20):
        errors = rng.exponential(1.0, size=rng.integers(20, 500))
        th = fit_threshold(errors)
        above = np.mean(errors > th.tau)
        assert above <= 0.05 + 1.0 / len(errors)


def test_threshold_monotone_under_larger_errors():
    rng = np.random.default_rng(2)
    errors = rng.random(100)
    tau = fit_threshold(errors).tau
    extended = np.concatenate([errors, errors.max() + rng.random(20) + 1.0])
    assert fit_threshold(extended).tau >= tau


def test_threshold_dict_roundtrip():
    th = fit_threshold(np.arange(1.0, 101.0))
    assert Threshold.from_dict(th.to_dict()) == th


# ── Classification ────────────────────────────────────────────────────────


def test_classification_is_strictly_above():
    th = Threshold(tau=1.0)
    assert classify(1.0, th) == 0  # tie -> normal
    assert classify(1.0 + 1e-12, th) == 1
    assert classify(0.0, th) == 0


def test_classify_rejects_non_finite():
    with pytest.raises(ValueError):
        classify(float("inf"), Threshold(tau=1.0))


def test_classify_batch_matches_scalar():
    th = Threshold(tau=0.5)
    errors = np.array([0.0, 0.5, 0.500001, 2.0])
    assert classify_batch(errors, th).tolist() == [0, 0, 1, 1]


def test_classification_invariant_under_monotone_transforms():
    rng = np.random.default_rng(3)
    errors = rng.exponential(1.0, 200)
    th = fit_threshold(errors)
    flags = classify_batch(errors, th)
    for transform in (np.sqrt, np.log1p, lambda x: x**3 + 2 * x):
        t_flags = transform(errors) > transform(th.tau)
        assert np.array_equal(flags.astype(bool), t_flags)


# ── Metrics ───────────────────────────────────────────────────────────────


def test_perfect_flags_give_unit_metrics():
    report = evaluate([1, 0, 1, 0, 1], [1, 0, 1, 0, 1], "x")
    assert (report.precision, report.recall, report.f1) == (1.0, 1.0, 1.0)


def test_hand_counted_confusion_matrix():
    report = evaluate([1, 0, 1, 0], [1, 1, 0, 0], "x")
    assert (report.tp, report.fp, report.fn, report.tn) == (1, 1, 1, 1)
    assert report.precision == report.recall == report.f1 == 0.5


def test_zero_denominator_metrics_are_zero():
    report = evaluate([0, 0, 0], [0, 0, 0], "x")
    assert (report.precision, report.recall, report.f1) == (0.0, 0.0, 0.0)
    report = evaluate([0, 0], [1, 1], "x")
    assert report.recall == 0.0 and report.f1 == 0.0


def test_confusion_counts_partition_windows():
    rng = np.random.default_rng(4)
    flags = rng.integers(0, 2, 500)
    labels = rng.integers(0, 2, 500)
    report = evaluate(flags, labels, "x")
    assert report.tp + report.fp + report.tn + report.fn == 500


def test_evaluate_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        evaluate([1, 0], [1], "x")
    with pytest.raises(ValueError):
        evaluate([], [], "x")


@pytest.mark.parametrize("scenario, row", REFERENCE_ROWS.items())
def test_reference_f1_is_consistent_with_precision_recall(scenario, row):
    precision, recall, f1 = row
    recomputed = 2 * precision * recall / (precision + recall)
    assert recomputed == pytest.approx(f1, abs=5e-4), scenario
    # and our metric helper follows the same harmonic-mean definition
    assert precision_recall_f1(1, 0, 0)[2] == 1.0


def test_f1_identity_holds_for_every_report():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n = rng.integers(4, 200)
        report = evaluate(rng.integers(0, 2, n), rng.integers(0, 2, n), "x")
        if report.precision + report.recall > 0:
            expected = 2 * report.precision * report.recall / (report.precision + report.recall)
        else:
            expected = 0.0
        assert abs(report.f1 - expected) < 1e-6


# ── Histogram / report files ──────────────────────────────────────────────


def test_histogram_counts_sum_to_error_count():
    rng = np.random.default_rng(6)
    errors = rng.exponential(1.0, 345)
    th = fit_threshold(errors)
    hist = error_histogram(errors, th, bins=17)
    assert sum(hist["count"]) == 345
    assert hist["threshold"] == th.tau
    assert len(hist["bin_left"]) == len(hist["bin_right"]) == len(hist["count"]) == 17


def test_histogram_single_bin_holds_everything():
    errors = np.ones(40)
    hist = error_histogram(errors, Threshold(tau=1.0), bins=1)
    assert hist["count"] == [40]


def test_histogram_rejects_bad_inputs():
    with pytest.raises(ValueError):
        error_histogram([], Threshold(tau=1.0))
    with pytest.raises(ValueError):
        error_histogram([1.0], Threshold(tau=1.0), bins=0)


def test_report_csv_header_is_stable(tmp_path):
    report = evaluate([1, 0], [1, 0], "PAx2", threshold=Threshold(tau=0.5))
    path = tmp_path / "report.csv"
    write_report_csv([report], path)
    header = path.read_text().splitlines()[0]
    assert header == "scenario,precision,recall,f1,tp,fp,tn,fn,threshold"
    assert ",".join(REPORT_FIELDS) == header


def test_threshold_rejects_negative_tau():
    with pytest.raises(ValueError):
        Threshold(tau=-0.1)
