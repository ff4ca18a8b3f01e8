"""Windowing and normalization of measurement series for the detector.

A labeled series becomes a dataset of overlapping fixed-length windows,
z-scored per feature with statistics fitted on training data (raw features
span volts to watts, three orders of magnitude apart).  A window inherits
label 1 if any frame it covers is labeled 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulator import TimeSeries

DEFAULT_WINDOW = 10


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature mean and population std of the training series."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=np.float64))
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean and std must be 1-D vectors of equal length")
        if np.any(self.std <= 0):
            raise ValueError("std components must be > 0")

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, raw: dict) -> "NormalizationStats":
        return cls(mean=np.array(raw["mean"]), std=np.array(raw["std"]))


def moments(values: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
    """Count, per-feature sum and per-feature sum of squares of a series.

    These summaries are what federation clients share instead of raw data;
    :func:`stats_from_moments` turns them (or their across-client sums)
    into normalization statistics.
    """
    values = np.asarray(values, dtype=np.float64)
    return len(values), values.sum(axis=0), (values * values).sum(axis=0)


def stats_from_moments(count: int, total: np.ndarray, total_sq: np.ndarray) -> NormalizationStats:
    if count <= 0:
        raise ValueError("need at least one frame to fit normalization stats")
    mean = total / count
    var = np.maximum(total_sq / count - mean * mean, 0.0)
    std = np.sqrt(var)
    std = np.where(std == 0.0, 1.0, std)  # zero-variance guard
    return NormalizationStats(mean=mean, std=std)


def fit_normalizer(series: TimeSeries) -> NormalizationStats:
    """Fit per-feature z-score statistics on a (training) series."""
    return stats_from_moments(*moments(series.values))


@dataclass(frozen=True)
class SequenceWindow:
    """One normalized (T, d) window with its any-overlap label."""

    values: np.ndarray
    start_index: int
    label: int


@dataclass
class SequenceDataset:
    """Overlapping normalized windows of one series.

    ``tensor`` is the (N, T, d) stack; ``labels`` and ``start_indices``
    align with its first axis.
    """

    tensor: np.ndarray
    labels: np.ndarray
    start_indices: np.ndarray
    stats: NormalizationStats

    def __post_init__(self):
        if self.tensor.ndim != 3:
            raise ValueError(f"expected (N, T, d) tensor, got shape {self.tensor.shape}")
        if not np.isfinite(self.tensor).all():
            raise ValueError("windows contain non-finite values")

    @property
    def T(self) -> int:
        return self.tensor.shape[1]

    @property
    def d(self) -> int:
        return self.tensor.shape[2]

    def __len__(self) -> int:
        return len(self.tensor)

    def window(self, i: int) -> SequenceWindow:
        return SequenceWindow(
            values=self.tensor[i], start_index=int(self.start_indices[i]), label=int(self.labels[i])
        )


def window(
    series: TimeSeries,
    stats: NormalizationStats,
    T: int = DEFAULT_WINDOW,
    stride: int = 1,
) -> SequenceDataset:
    """Cut a series into normalized overlapping windows of T steps.

    Yields floor((N - T) / stride) + 1 windows; a window is labeled 1 iff
    any frame it covers is labeled 1.
    """
    if T < 1 or stride < 1:
        raise ValueError("T and stride must be >= 1")
    n = len(series)
    if n < T:
        raise ValueError(f"series has {n} frames, need at least T={T}")
    normalized = stats.normalize(series.values)
    starts = np.arange(0, n - T + 1, stride)
    tensor = np.stack([normalized[s : s + T] for s in starts])
    labels = np.array([int(series.labels[s : s + T].any()) for s in starts], dtype=np.int8)
    return SequenceDataset(tensor=tensor, labels=labels, start_indices=starts, stats=stats)


def split_train_val(dataset: SequenceDataset, fraction: float = 0.9):
    """Chronological split: first ``fraction`` of windows train, rest validate.

    No shuffling; overlapping windows leak across a random split.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n = len(dataset)
    if n < 10:
        raise ValueError(f"need at least 10 windows to split, got {n}")
    cut = int(np.floor(fraction * n))
    if cut == 0 or cut == n:
        raise ValueError(f"degenerate split: {cut}/{n - cut}")

    def _slice(lo, hi):
        return SequenceDataset(
            tensor=dataset.tensor[lo:hi],
            labels=dataset.labels[lo:hi],
            start_indices=dataset.start_indices[lo:hi],
            stats=dataset.stats,
        )

    return _slice(0, cut), _slice(cut, n)
