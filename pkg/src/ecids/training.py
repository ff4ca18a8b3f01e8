"""Autoencoder training: Adam over shuffled mini-batches with early stopping.

Training minimizes mean squared reconstruction error.  Batches are drawn
in a seeded shuffled order each epoch (the last partial batch is kept), so
a fixed seed reproduces the loss trajectory exactly.  Validation loss is
monitored after every epoch; when it fails to improve for ``patience``
consecutive epochs training halts and, by default, the parameters of the
best validation epoch are restored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .model import ModelParameters, backward_batch, forward_batch
from .pipeline import SequenceDataset


class TrainingError(RuntimeError):
    """Non-finite loss or unusable training inputs."""

    def __init__(self, message: str, epoch: int | None = None, batch: int | None = None):
        where = ""
        if epoch is not None:
            where = f" (epoch {epoch}" + (f", batch {batch})" if batch is not None else ")")
        super().__init__(message + where)
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainingConfig:
    max_epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    patience: int = 5
    restore_best: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 1 <= self.patience <= self.max_epochs:
            raise ValueError("patience must be in [1, max_epochs]")

    def with_seed(self, seed: int) -> "TrainingConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "max_epochs": self.max_epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "patience": self.patience,
            "restore_best": self.restore_best,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainingConfig":
        return cls(**raw)


@dataclass
class TrainingReport:
    """Per-epoch losses plus where training stopped and which epoch won."""

    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0

    def rows(self) -> list[tuple[int, float, float]]:
        return [
            (epoch, tr, vl)
            for epoch, (tr, vl) in enumerate(zip(self.train_losses, self.val_losses), start=1)
        ]


class Adam:
    """Standard Adam with bias correction, one moment pair per tensor."""

    def __init__(self, params: ModelParameters, config: TrainingConfig):
        self.lr = config.learning_rate
        self.beta1 = config.beta1
        self.beta2 = config.beta2
        self.eps = config.epsilon
        self.t = 0
        self.m = {name: np.zeros_like(tensor) for name, tensor in params.named_tensors()}
        self.v = {name: np.zeros_like(tensor) for name, tensor in params.named_tensors()}

    def step(self, params: ModelParameters, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for name, tensor in params.named_tensors():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            tensor -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def mse_loss(x: np.ndarray, y: np.ndarray) -> float:
    diff = y - x
    return float(np.mean(diff * diff))


def validation_loss(params: ModelParameters, windows: np.ndarray, batch_size: int = 512) -> float:
    """Mean squared reconstruction error over a window stack."""
    total = 0.0
    count = 0
    for lo in range(0, len(windows), batch_size):
        chunk = np.asarray(windows[lo : lo + batch_size], dtype=params.dtype)
        recon = forward_batch(params, chunk)
        diff = recon - chunk
        total += float(np.sum(diff * diff))
        count += diff.size
    return total / count


def train(
    params: ModelParameters,
    train_ds: SequenceDataset,
    val_ds: SequenceDataset,
    config: TrainingConfig,
    log=None,
) -> tuple[ModelParameters, TrainingReport]:
    """Fit the autoencoder; returns (parameters, report).

    ``params`` is not modified; the returned parameters are those of the
    best validation epoch when ``restore_best``, else of the last epoch.
    ``log`` is an optional callable fed one line per epoch.
    """
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise TrainingError("training and validation datasets must be non-empty")
    x_train = np.asarray(train_ds.tensor, dtype=params.dtype)
    x_val = np.asarray(val_ds.tensor, dtype=params.dtype)

    params = params.copy()
    optimizer = Adam(params, config)
    rng = np.random.default_rng(config.seed)
    report = TrainingReport()

    best_val = np.inf
    best_params = params.copy()
    epochs_since_best = 0

    n = len(x_train)
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        sq_sum = 0.0
        element_count = 0
        for batch_index, lo in enumerate(range(0, n, config.batch_size)):
            batch = x_train[order[lo : lo + config.batch_size]]
            recon, cache = forward_batch(params, batch, with_cache=True)
            diff = recon - batch
            batch_sq = float(np.sum(diff * diff))
            if not np.isfinite(batch_sq):
                raise TrainingError("loss is not finite", epoch=epoch, batch=batch_index)
            sq_sum += batch_sq
            element_count += diff.size
            d_out = (2.0 / diff.size) * diff
            grads = backward_batch(params, cache, d_out.astype(params.dtype))
            optimizer.step(params, grads)

        train_loss = sq_sum / element_count
        val_loss = validation_loss(params, x_val)
        if not np.isfinite(val_loss):
            raise TrainingError("validation loss is not finite", epoch=epoch)
        report.train_losses.append(train_loss)
        report.val_losses.append(val_loss)
        report.stopped_epoch = epoch

        if val_loss < best_val:
            best_val = val_loss
            report.best_epoch = epoch
            best_params = params.copy()
            epochs_since_best = 0
        else:
            epochs_since_best += 1

        if log is not None:
            log(
                f"epoch {epoch:3d}  train_mse {train_loss:.6e}  val_mse {val_loss:.6e}"
                + ("  *" if report.best_epoch == epoch else "")
            )
        if epochs_since_best >= config.patience:
            break

    return (best_params if config.restore_best else params), report
