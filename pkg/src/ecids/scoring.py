"""End-to-end scoring: run a trained model over a series and report.

Glue between the pipeline, model and detection layers used by the CLI
commands, the scenario evaluation matrix and the centralized-vs-federated
comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacks import preset
from .detection import DetectionReport, Threshold, classify_batch, evaluate
from .model import ModelParameters, reconstruction_errors
from .pipeline import NormalizationStats, window
from .simulator import SimulationConfig, TimeSeries, simulate


@dataclass(frozen=True)
class LoadedModel:
    """A checkpointed model with its normalization stats and threshold."""

    name: str
    params: ModelParameters
    stats: NormalizationStats
    threshold: Threshold


def score_series(params: ModelParameters, stats: NormalizationStats, series: TimeSeries):
    """Per-window reconstruction errors and any-overlap labels of a series."""
    dataset = window(series, stats, T=params.config.T)
    errors = reconstruction_errors(params, dataset.tensor)
    return errors, dataset.labels


def detect_series(model: LoadedModel, series: TimeSeries, scenario_name: str) -> DetectionReport:
    """Score a series and evaluate flags against its labels."""
    errors, labels = score_series(model.params, model.stats, series)
    flags = classify_batch(errors, model.threshold)
    return evaluate(flags, labels, scenario_name, errors=errors, threshold=model.threshold)


def evaluate_matrix(
    models: list[LoadedModel],
    scenario_names: list[str],
    sim_config: SimulationConfig,
    test_seed: int,
) -> tuple[list[tuple[str, DetectionReport]], list[tuple[str, str, str]]]:
    """Run every (model, scenario) pair on a freshly simulated test day.

    All scenarios attack the same test day (same seed), so rows are
    comparable.  Returns (results, failures): failures carry
    (model, scenario, message) and do not stop remaining pairs.
    """
    results: list[tuple[str, DetectionReport]] = []
    failures: list[tuple[str, str, str]] = []
    series_cache: dict[str, TimeSeries] = {}
    for scenario in scenario_names:
        try:
            series_cache[scenario] = simulate(
                sim_config.with_seed(test_seed), attack=preset(scenario)
            )
        except Exception as exc:
            for model in models:
                failures.append((model.name, scenario, str(exc)))
    for model in models:
        for scenario, series in series_cache.items():
            try:
                results.append((model.name, detect_series(model, series, scenario)))
            except Exception as exc:
                failures.append((model.name, scenario, str(exc)))
    return results, failures


def compare_models(
    centralized: LoadedModel,
    federated: LoadedModel,
    scenario_names: list[str],
    sim_config: SimulationConfig,
    test_seed: int,
) -> list[dict]:
    """Per-scenario metric comparison between two models.

    Each model classifies with its own threshold; the rows carry both
    metric sets plus federated-minus-centralized deltas.
    """
    if centralized.params.config != federated.params.config:
        raise ValueError("models have different geometry; comparison is meaningless")
    rows: list[dict] = []
    for scenario in scenario_names:
        series = simulate(sim_config.with_seed(test_seed), attack=preset(scenario))
        central_report = detect_series(centralized, series, scenario)
        fed_report = detect_series(federated, series, scenario)
        rows.append(
            {
                "scenario": scenario,
                "precision_centralized": central_report.precision,
                "recall_centralized": central_report.recall,
                "f1_centralized": central_report.f1,
                "precision_federated": fed_report.precision,
                "recall_federated": fed_report.recall,
                "f1_federated": fed_report.f1,
                "delta_precision": fed_report.precision - central_report.precision,
                "delta_recall": fed_report.recall - central_report.recall,
                "delta_f1": fed_report.f1 - central_report.f1,
            }
        )
    return rows


def flagged_fraction(model: LoadedModel, series: TimeSeries) -> float:
    """Fraction of windows of a series the model flags as anomalous."""
    errors, _ = score_series(model.params, model.stats, series)
    return float(np.mean(classify_batch(errors, model.threshold)))
