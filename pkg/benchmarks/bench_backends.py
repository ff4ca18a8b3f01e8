#!/usr/bin/env python3
"""Benchmark the compiled LSTM cell kernel against the numpy fallback.

Times one layer's sequence forward/backward and a full autoencoder
training step at the production geometry, then prints a comparison table
and the maximum numerical disagreement between backends.

Usage: python benchmarks/bench_backends.py [--batch 128] [--repeats 30]
"""

import argparse
import time

import numpy as np

import ecids._kernels.driver as driver
from ecids._kernels import cell_backend
from ecids.model import ModelConfig, backward_batch, forward_batch, init


def best_of(fn, repeats, inner=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def bench_layer(cell, batch, dtype, repeats):
    rng = np.random.default_rng(0)
    t_len, d, hidden = 10, 14, 128
    x = np.ascontiguousarray(rng.standard_normal((t_len, batch, d)).astype(dtype))
    wx = (rng.standard_normal((4 * hidden, d)) * 0.3).astype(dtype)
    wh = (rng.standard_normal((4 * hidden, hidden)) * 0.3).astype(dtype)
    b = np.zeros(4 * hidden, dtype=dtype)

    out, cache = driver.lstm_forward(cell, x, wx, wh, b, True)
    d_out = (np.ones_like(out) / out.size).astype(dtype)

    fwd = best_of(lambda: driver.lstm_forward(cell, x, wx, wh, b, True), repeats)
    bwd = best_of(lambda: driver.lstm_backward(cell, cache, d_out, True), repeats)
    return fwd, bwd


class _use_backend:
    """Temporarily route the model's layer calls through one cell backend."""

    def __init__(self, cell_name):
        self.cell = cell_backend(cell_name)

    def __enter__(self):
        import ecids.model as model_module

        self.saved = (model_module.lstm_forward, model_module.lstm_backward)
        model_module.lstm_forward = lambda *a, **k: driver.lstm_forward(self.cell, *a, **k)
        model_module.lstm_backward = lambda *a, **k: driver.lstm_backward(self.cell, *a, **k)
        return self

    def __exit__(self, *exc):
        import ecids.model as model_module

        model_module.lstm_forward, model_module.lstm_backward = self.saved


def bench_model(cell_name, batch, dtype, repeats):
    params = init(ModelConfig(), seed=3, dtype=dtype)
    x = np.random.default_rng(0).standard_normal((batch, 10, 14)).astype(dtype)

    def step():
        recon, cache = forward_batch(params, x, with_cache=True)
        diff = recon - x
        backward_batch(params, cache, ((2.0 / diff.size) * diff).astype(dtype))

    with _use_backend(cell_name):
        step()
        elapsed = best_of(step, repeats)
        recon = forward_batch(params, x)
    return elapsed, recon


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    backends = ["numpy"]
    try:
        cell_backend("cython")
        backends.append("cython")
    except ValueError:
        print("compiled kernel not available; benchmarking numpy only")

    print(f"\nbatch={args.batch}, layer 14->128, window 10, best of {args.repeats}\n")
    print(f"{'dtype':8s} {'backend':8s} {'layer fwd':>11s} {'layer bwd':>11s} {'model step':>11s}")
    results = {}
    for dtype in (np.float32, np.float64):
        for name in backends:
            fwd, bwd = bench_layer(cell_backend(name), args.batch, dtype, args.repeats)
            step, recon = bench_model(name, args.batch, dtype, args.repeats)
            results[(np.dtype(dtype).name, name)] = (step, recon)
            print(
                f"{np.dtype(dtype).name:8s} {name:8s} {fwd * 1e3:9.2f} ms {bwd * 1e3:9.2f} ms {step * 1e3:9.2f} ms"
            )
        if len(backends) == 2:
            slow, recon_np = results[(np.dtype(dtype).name, "numpy")]
            fast, recon_cy = results[(np.dtype(dtype).name, "cython")]
            drift = float(np.max(np.abs(recon_np - recon_cy)))
            print(f"{'':8s} speedup x{slow / fast:.2f}, max output diff {drift:.2e}\n")


if __name__ == "__main__":
    main()
