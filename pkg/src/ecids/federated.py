"""Federated training of the autoencoder across simulated clients.

Each client owns one independently simulated day of normal operation and
never shares raw frames.  Before the first round the server aggregates
per-feature moment summaries (count, sum, sum of squares) into global
normalization statistics; each round it broadcasts the global parameters,
clients train locally for a fixed number of epochs, and the server
averages the returned parameters weighted by client sample counts.  After
the final round each client fits a local detection threshold on its own
training errors and the server takes the sample-weighted mean.

Clients sit behind a narrow endpoint interface (moment summary, fit,
threshold), so the in-process harness used here can be swapped for a real
transport without touching the training logic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detection import Threshold, fit_threshold
from .scoring import compare_models  # noqa: F401  (comparison lives with scoring)
from .model import ModelConfig, ModelParameters, init, reconstruction_errors
from .pipeline import (
    NormalizationStats,
    SequenceDataset,
    moments,
    split_train_val,
    stats_from_moments,
    window,
)
from .simulator import SimulationConfig, simulate
from .training import TrainingConfig, train


@dataclass(frozen=True)
class FederationConfig:
    num_clients: int = 3
    num_rounds: int = 3
    local_epochs_per_round: int = 5
    client_seeds: tuple[int, ...] = (101, 202, 303)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    dtype: str = "float64"

    def __post_init__(self):
        object.__setattr__(self, "client_seeds", tuple(self.client_seeds))
        if self.num_clients < 1:
            raise ValueError("num_clients must be >= 1")
        if self.num_rounds < 1:
            raise ValueError("num_rounds must be >= 1")
        if self.local_epochs_per_round < 0:
            raise ValueError("local_epochs_per_round must be >= 0")
        if len(self.client_seeds) != self.num_clients:
            raise ValueError(
                f"need {self.num_clients} client seeds, got {len(self.client_seeds)}"
            )
        if len(set(self.client_seeds)) != self.num_clients:
            raise ValueError("client seeds must be distinct")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")

    def to_dict(self) -> dict:
        return {
            "num_clients": self.num_clients,
            "num_rounds": self.num_rounds,
            "local_epochs_per_round": self.local_epochs_per_round,
            "client_seeds": list(self.client_seeds),
            "training": self.training.to_dict(),
            "simulation": self.simulation.to_dict(),
            "model": self.model.to_dict(),
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "FederationConfig":
        kwargs = dict(raw)
        if "training" in kwargs:
            kwargs["training"] = TrainingConfig.from_dict(kwargs["training"])
        if "simulation" in kwargs:
            kwargs["simulation"] = SimulationConfig.from_dict(kwargs["simulation"])
        if "model" in kwargs:
            kwargs["model"] = ModelConfig.from_dict(kwargs["model"])
        if "client_seeds" in kwargs:
            kwargs["client_seeds"] = tuple(kwargs["client_seeds"])
        return cls(**kwargs)


@dataclass
class ClientUpdate:
    client_id: int
    parameters: ModelParameters
    sample_count: int
    local_loss: float

    def __post_init__(self):
        if self.sample_count <= 0:
            raise ValueError("sample_count must be > 0")


def round_seed(base_seed: int, round_index: int, client_id: int) -> int:
    """Deterministic training seed for (round, client); stable across runs."""
    return int(np.random.SeedSequence([base_seed, round_index, client_id]).generate_state(1)[0])


def client_local_train(
    client_id: int,
    global_params: ModelParameters,
    local_train_ds: SequenceDataset,
    local_val_ds: SequenceDataset,
    epochs: int,
    training: TrainingConfig,
) -> ClientUpdate:
    """One client's contribution for a round, starting from the global model."""
    if len(local_train_ds) == 0:
        raise ValueError(f"client {client_id} has no local training data")
    if epochs == 0:
        from .training import validation_loss

        return ClientUpdate(
            client_id=client_id,
            parameters=global_params.copy(),
            sample_count=len(local_train_ds),
            local_loss=validation_loss(global_params, local_val_ds.tensor),
        )
    config = TrainingConfig(
        max_epochs=epochs,
        batch_size=training.batch_size,
        learning_rate=training.learning_rate,
        beta1=training.beta1,
        beta2=training.beta2,
        epsilon=training.epsilon,
        patience=min(training.patience, epochs),
        restore_best=training.restore_best,
        seed=training.seed,
    )
    params, report = train(global_params, local_train_ds, local_val_ds, config)
    return ClientUpdate(
        client_id=client_id,
        parameters=params,
        sample_count=len(local_train_ds),
        local_loss=report.val_losses[report.best_epoch - 1],
    )


def fed_avg(updates: list[ClientUpdate]) -> ModelParameters:
    """Sample-count-weighted mean of client parameters, tensor by tensor."""
    if not updates:
        raise ValueError("need at least one client update")
    total = sum(u.sample_count for u in updates)
    reference = updates[0].parameters
    averaged = reference.copy()
    tensors = [dict(u.parameters.named_tensors()) for u in updates]
    for name, ref_tensor in reference.named_tensors():
        for update, named in zip(updates, tensors):
            if name not in named or named[name].shape != ref_tensor.shape:
                raise ValueError(f"client {update.client_id} parameter {name!r} does not match")
        # Anchor form of the weighted mean: identical inputs come back
        # bit-identical for any weights (the sum of weights never has to
        # round to 1 explicitly).
        acc = ref_tensor.astype(np.float64, copy=True)
        for update, named in zip(updates[1:], tensors[1:]):
            acc += (update.sample_count / total) * (
                named[name].astype(np.float64) - ref_tensor
            )
        averaged.set_tensor(name, acc.astype(reference.dtype))
    return averaged


class InProcessClient:
    """Client endpoint holding its simulated day locally."""

    def __init__(self, client_id: int, data_seed: int, fcfg: FederationConfig):
        self.client_id = client_id
        self._series = simulate(fcfg.simulation.with_seed(data_seed))
        self._fcfg = fcfg
        self._train_ds: SequenceDataset | None = None
        self._val_ds: SequenceDataset | None = None

    def moment_summary(self):
        return moments(self._series.values)

    def prepare(self, stats) -> int:
        dataset = window(self._series, stats, T=self._fcfg.model.T)
        self._train_ds, self._val_ds = split_train_val(dataset)
        return len(self._train_ds)

    def fit(self, global_params: ModelParameters, round_index: int) -> ClientUpdate:
        training = self._fcfg.training.with_seed(
            round_seed(self._fcfg.training.seed, round_index, self.client_id)
        )
        return client_local_train(
            self.client_id,
            global_params,
            self._train_ds,
            self._val_ds,
            self._fcfg.local_epochs_per_round,
            training,
        )

    def local_threshold(self, params: ModelParameters) -> tuple[float, int]:
        errors = reconstruction_errors(params, self._train_ds.tensor)
        return fit_threshold(errors).tau, len(errors)


def run_federation(
    fcfg: FederationConfig, log=None
) -> tuple[ModelParameters, list[dict], NormalizationStats, Threshold]:
    """Run the full federation; returns (model, round log, stats, threshold).

    The round log has one entry per (round, client) with the client's
    best local validation loss and sample count.  Any client failure
    aborts the round (no partial aggregation).
    """
    clients = [
        InProcessClient(k, seed, fcfg) for k, seed in enumerate(fcfg.client_seeds)
    ]
    stats = stats_from_moments(*_sum_moments(c.moment_summary() for c in clients))
    for client in clients:
        client.prepare(stats)

    global_params = init(fcfg.model, seed=fcfg.training.seed, dtype=np.dtype(fcfg.dtype))
    rounds_log: list[dict] = []
    for round_index in range(1, fcfg.num_rounds + 1):
        updates = [client.fit(global_params, round_index) for client in clients]
        global_params = fed_avg(updates)
        for update in updates:
            rounds_log.append(
                {
                    "round": round_index,
                    "client_id": update.client_id,
                    "local_loss": update.local_loss,
                    "sample_count": update.sample_count,
                }
            )
        if log is not None:
            mean_loss = float(np.mean([u.local_loss for u in updates]))
            log(f"round {round_index}: mean client val_mse {mean_loss:.6e}")

    taus, weights = zip(*(client.local_threshold(global_params) for client in clients))
    tau = float(np.average(taus, weights=weights))
    threshold = Threshold(tau=tau, source_error_count=int(sum(weights)))
    return global_params, rounds_log, stats, threshold


def _sum_moments(summaries):
    total_count = 0
    total_sum = None
    total_sq = None
    for count, s, sq in summaries:
        total_count += count
        total_sum = s if total_sum is None else total_sum + s
        total_sq = sq if total_sq is None else total_sq + sq
    return total_count, total_sum, total_sq


def mean_round_losses(rounds_log: list[dict]) -> dict[int, float]:
    """Mean client loss per round from a round log."""
    by_round: dict[int, list[float]] = {}
    for entry in rounds_log:
        by_round.setdefault(entry["round"], []).append(entry["local_loss"])
    return {r: float(np.mean(v)) for r, v in sorted(by_round.items())}
