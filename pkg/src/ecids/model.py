"""Sequence-to-sequence LSTM autoencoder over measurement windows.

The encoder stacks two LSTM layers (the second returning only its final
hidden state), the latent vector is repeated across the window length, and
two mirrored decoder LSTM layers followed by a per-timestep linear readout
reconstruct the input.  With the default geometry (14 features, windows of
10, units 128/64/64/128) the model has 256,270 trainable scalars.

Parameters are named tensors in a fixed layout so checkpoints are portable:
per LSTM layer an input kernel (4H, D), a recurrent kernel (4H, H) and a
bias (4H,), gate blocks ordered input, forget, cell, output; the readout
holds a kernel (H, d) and bias (d,).  Kernels are Glorot-uniform at init,
biases zero except the forget-gate block at 1.0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ._kernels import lstm_backward, lstm_forward
from .pipeline import NormalizationStats

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Geometry of the autoencoder."""

    d: int = 14
    T: int = 10
    encoder_units: tuple[int, ...] = (128, 64)
    decoder_units: tuple[int, ...] = (64, 128)
    output_activation: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "encoder_units", tuple(self.encoder_units))
        object.__setattr__(self, "decoder_units", tuple(self.decoder_units))
        if self.d < 1 or self.T < 1:
            raise ValueError("d and T must be >= 1")
        if not self.encoder_units or not self.decoder_units:
            raise ValueError("need at least one encoder and one decoder layer")
        if tuple(reversed(self.encoder_units)) != self.decoder_units:
            raise ValueError(
                f"decoder units {self.decoder_units} must mirror encoder units {self.encoder_units}"
            )
        if self.output_activation != "linear":
            raise ValueError("only a linear readout is supported")

    @property
    def latent_dim(self) -> int:
        return self.encoder_units[-1]

    def layer_dims(self) -> list[tuple[int, int]]:
        """(input_dim, hidden_units) for every LSTM layer, encoder first."""
        dims: list[tuple[int, int]] = []
        prev = self.d
        for units in self.encoder_units:
            dims.append((prev, units))
            prev = units
        prev = self.latent_dim
        for units in self.decoder_units:
            dims.append((prev, units))
            prev = units
        return dims

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "T": self.T,
            "encoder_units": list(self.encoder_units),
            "decoder_units": list(self.decoder_units),
            "output_activation": self.output_activation,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        return cls(
            d=raw["d"],
            T=raw["T"],
            encoder_units=tuple(raw["encoder_units"]),
            decoder_units=tuple(raw["decoder_units"]),
            output_activation=raw.get("output_activation", "linear"),
        )


def param_count(config: ModelConfig) -> int:
    """Exact trainable-scalar count: 4H(D+H+1) per LSTM layer plus readout."""
    total = sum(4 * h * (d + h + 1) for d, h in config.layer_dims())
    total += config.decoder_units[-1] * config.d + config.d
    return total


@dataclass
class LstmLayerParams:
    input_kernel: np.ndarray
    recurrent_kernel: np.ndarray
    bias: np.ndarray


@dataclass
class ModelParameters:
    """Named parameter tensors of one autoencoder instance."""

    config: ModelConfig
    layers: list[LstmLayerParams]
    output_kernel: np.ndarray
    output_bias: np.ndarray

    _LAYER_TENSORS = ("input_kernel", "recurrent_kernel", "bias")

    def layer_names(self) -> list[str]:
        n_enc = len(self.config.encoder_units)
        return [
            f"encoder_{i + 1}" if i < n_enc else f"decoder_{i - n_enc + 1}"
            for i in range(len(self.layers))
        ]

    def named_tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        """Canonical (name, tensor) order used by checkpoints and optimizers."""
        for name, layer in zip(self.layer_names(), self.layers):
            for attr in self._LAYER_TENSORS:
                yield f"{name}.{attr}", getattr(layer, attr)
        yield "output.kernel", self.output_kernel
        yield "output.bias", self.output_bias

    def set_tensor(self, name: str, value: np.ndarray) -> None:
        head, attr = name.split(".")
        if head == "output":
            setattr(self, f"output_{attr}", value)
        else:
            idx = self.layer_names().index(head)
            setattr(self.layers[idx], attr, value)

    def scalar_count(self) -> int:
        return sum(t.size for _, t in self.named_tensors())

    @property
    def dtype(self) -> np.dtype:
        return self.output_kernel.dtype

    def copy(self) -> "ModelParameters":
        return ModelParameters(
            config=self.config,
            layers=[
                LstmLayerParams(l.input_kernel.copy(), l.recurrent_kernel.copy(), l.bias.copy())
                for l in self.layers
            ],
            output_kernel=self.output_kernel.copy(),
            output_bias=self.output_bias.copy(),
        )

    def astype(self, dtype) -> "ModelParameters":
        out = self.copy()
        for name, tensor in out.named_tensors():
            out.set_tensor(name, tensor.astype(dtype))
        return out


def init(config: ModelConfig, seed: int, dtype=np.float64) -> ModelParameters:
    """Deterministic Glorot-uniform initialization.

    Every gate block of an input kernel is (H, D) with limit
    sqrt(6 / (D + H)); blocks share the limit, so the full (4H, D) tensor
    is drawn at once.  Biases start at zero with the forget-gate block set
    to 1.0.
    """
    rng = np.random.default_rng(seed)

    def glorot(shape, fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape).astype(dtype)

    layers = []
    for d_in, h in config.layer_dims():
        wx = glorot((4 * h, d_in), d_in, h)
        wh = glorot((4 * h, h), h, h)
        b = np.zeros(4 * h, dtype=dtype)
        b[h : 2 * h] = 1.0
        layers.append(LstmLayerParams(wx, wh, b))

    h_last = config.decoder_units[-1]
    return ModelParameters(
        config=config,
        layers=layers,
        output_kernel=glorot((h_last, config.d), h_last, config.d),
        output_bias=np.zeros(config.d, dtype=dtype),
    )


# ── Forward / backward ───────────────────────────────────────────────────


def forward_batch(params: ModelParameters, x: np.ndarray, with_cache: bool = False):
    """Reconstruct a (B, T, d) batch; returns (B, T, d).

    With ``with_cache`` the per-layer intermediates for backprop are
    returned as a second value.
    """
    cfg = params.config
    x = np.asarray(x, dtype=params.dtype)
    if x.ndim != 3 or x.shape[1] != cfg.T or x.shape[2] != cfg.d:
        raise ValueError(f"expected (B, {cfg.T}, {cfg.d}) input, got {x.shape}")
    n_enc = len(cfg.encoder_units)
    batch = x.shape[0]

    h = np.ascontiguousarray(x.transpose(1, 0, 2))
    caches = []
    for i, layer in enumerate(params.layers[:n_enc]):
        last = i == n_enc - 1
        h, cache = lstm_forward(
            h, layer.input_kernel, layer.recurrent_kernel, layer.bias, return_sequences=not last
        )
        caches.append(cache)

    # Repeat the latent vector across the window length.
    h = np.ascontiguousarray(np.broadcast_to(h, (cfg.T, batch, cfg.latent_dim)))
    for layer in params.layers[n_enc:]:
        h, cache = lstm_forward(
            h, layer.input_kernel, layer.recurrent_kernel, layer.bias, return_sequences=True
        )
        caches.append(cache)

    flat = h.reshape(cfg.T * batch, -1)
    y = (flat @ params.output_kernel + params.output_bias).reshape(cfg.T, batch, cfg.d)
    out = np.ascontiguousarray(y.transpose(1, 0, 2))
    if with_cache:
        return out, (caches, h)
    return out


def backward_batch(params: ModelParameters, cache, d_out: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of every named tensor given d(loss)/d(reconstruction)."""
    cfg = params.config
    caches, dec_states = cache
    n_enc = len(cfg.encoder_units)
    batch = d_out.shape[0]
    names = [n for n, _ in params.named_tensors()]
    grads: dict[str, np.ndarray] = {}

    dy = np.ascontiguousarray(d_out.transpose(1, 0, 2)).reshape(cfg.T * batch, cfg.d)
    dec_flat = dec_states.reshape(cfg.T * batch, -1)
    grads["output.kernel"] = dec_flat.T @ dy
    grads["output.bias"] = dy.sum(axis=0)
    dh = (dy @ params.output_kernel.T).reshape(cfg.T, batch, -1)

    layer_names = params.layer_names()
    for i in range(len(params.layers) - 1, n_enc - 1, -1):
        dh, dwx, dwh, db = lstm_backward(caches[i], dh, return_sequences=True)
        grads[f"{layer_names[i]}.input_kernel"] = dwx
        grads[f"{layer_names[i]}.recurrent_kernel"] = dwh
        grads[f"{layer_names[i]}.bias"] = db

    dh = dh.sum(axis=0)  # collapse the repeated latent back to one vector
    for i in range(n_enc - 1, -1, -1):
        dh, dwx, dwh, db = lstm_backward(caches[i], dh, return_sequences=i != n_enc - 1)
        grads[f"{layer_names[i]}.input_kernel"] = dwx
        grads[f"{layer_names[i]}.recurrent_kernel"] = dwh
        grads[f"{layer_names[i]}.bias"] = db

    return {name: grads[name] for name in names}


def forward(params: ModelParameters, window: np.ndarray) -> np.ndarray:
    """Reconstruct a single (T, d) window."""
    window = np.asarray(window, dtype=params.dtype)
    if window.ndim != 2:
        raise ValueError(f"expected a (T, d) window, got shape {window.shape}")
    return forward_batch(params, window[None])[0]


def reconstruction_error(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Mean absolute deviation between a window and its reconstruction."""
    x = np.asarray(x)
    x_hat = np.asarray(x_hat)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    return float(np.abs(x - x_hat).mean())


def reconstruction_errors(params: ModelParameters, windows: np.ndarray, batch_size: int = 512) -> np.ndarray:
    """Per-window mean absolute reconstruction error for an (N, T, d) stack."""
    windows = np.asarray(windows, dtype=params.dtype)
    errors = np.empty(len(windows), dtype=np.float64)
    for lo in range(0, len(windows), batch_size):
        chunk = windows[lo : lo + batch_size]
        recon = forward_batch(params, chunk)
        errors[lo : lo + len(chunk)] = np.abs(chunk - recon).mean(axis=(1, 2))
    return errors


# ── Checkpoints ──────────────────────────────────────────────────────────


class CheckpointError(ValueError):
    """Unreadable, corrupt, or incompatible checkpoint file."""


def save_checkpoint(
    params: ModelParameters,
    stats: NormalizationStats,
    path,
    extra: dict | None = None,
) -> None:
    """Write a versioned JSON checkpoint (bit-exact round trip via repr)."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "model": params.config.to_dict(),
        "dtype": np.dtype(params.dtype).name,
        "normalization": stats.to_dict(),
        "parameters": {
            name: {"shape": list(tensor.shape), "data": tensor.ravel().tolist()}
            for name, tensor in params.named_tensors()
        },
    }
    if extra:
        payload["extra"] = extra
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> tuple[ModelParameters, NormalizationStats, dict]:
    """Read a checkpoint; returns (parameters, normalization stats, extra)."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from None

    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CheckpointError(f"{path} is not a model checkpoint")
    version = payload["format_version"]
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {version} not supported (expected {CHECKPOINT_VERSION})"
        )
    if "normalization" not in payload:
        raise CheckpointError("checkpoint is missing normalization stats")

    config = ModelConfig.from_dict(payload["model"])
    dtype = np.dtype(payload.get("dtype", "float64"))
    stats = NormalizationStats.from_dict(payload["normalization"])

    stored = payload["parameters"]
    params = init(config, seed=0, dtype=dtype)  # shapes template, then overwritten
    for name, tensor in params.named_tensors():
        if name not in stored:
            raise CheckpointError(f"checkpoint is missing tensor {name!r}")
        entry = stored[name]
        data = np.asarray(entry["data"], dtype=dtype).reshape(entry["shape"])
        if data.shape != tensor.shape:
            raise CheckpointError(
                f"tensor {name!r} has shape {data.shape}, expected {tensor.shape}"
            )
        params.set_tensor(name, data)
    return params, stats, payload.get("extra", {})
