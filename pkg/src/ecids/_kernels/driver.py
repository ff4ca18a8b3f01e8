"""Sequence-level LSTM forward/backward shared by both cell backends.

The recurrent loop and all GEMMs (input projections, recurrent
projections, weight-gradient reductions) live here and go through BLAS;
the per-timestep gate math is delegated to a cell backend that either
fuses it in C (compiled extension) or uses numpy vector ops (fallback).

Array conventions
-----------------
Sequences are time-major: ``X`` is (T, B, D).  Weights follow the
checkpoint layout: input kernel (4H, D), recurrent kernel (4H, H), bias
(4H,), with gate blocks ordered input, forget, cell, output along the 4H
axis.  All arrays of one call share a float32 or float64 dtype.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class LstmCache(NamedTuple):
    """Forward-pass intermediates needed by the backward pass."""

    x: np.ndarray  # (T, B, D) layer input
    wx: np.ndarray  # (4H, D)
    wh: np.ndarray  # (4H, H)
    gates: np.ndarray  # (T, B, 4H) post-activation [i | f | g | o]
    c: np.ndarray  # (T, B, H) cell state
    tanh_c: np.ndarray  # (T, B, H)
    h: np.ndarray  # (T, B, H) hidden state after each step


def lstm_forward(cell, x, wx, wh, b, return_sequences: bool):
    """Run one LSTM layer over a (T, B, D) batch.

    Returns ``(out, cache)`` where ``out`` is (T, B, H) when
    ``return_sequences`` else the final hidden state (B, H).
    """
    t_len, batch, _ = x.shape
    hidden = wh.shape[1]
    dtype = x.dtype

    # Input projection for every step in one GEMM.
    pre = x.reshape(t_len * batch, -1) @ wx.T
    pre += b
    # The slab is reused in place: each step's pre-activations are
    # overwritten by the post-activation gates (the cell reads every
    # element exactly once before writing it back).
    gates = np.ascontiguousarray(pre.reshape(t_len, batch, 4 * hidden))
    c_all = np.empty((t_len, batch, hidden), dtype=dtype)
    tanh_c = np.empty((t_len, batch, hidden), dtype=dtype)
    h_all = np.empty((t_len, batch, hidden), dtype=dtype)
    h = np.zeros((batch, hidden), dtype=dtype)
    c = np.zeros((batch, hidden), dtype=dtype)

    wh_t = wh.T
    for t in range(t_len):
        z = gates[t]
        z += h @ wh_t
        cell.forward_cell(z, c, z, c_all[t], tanh_c[t], h_all[t])
        h = h_all[t]
        c = c_all[t]

    cache = LstmCache(x=x, wx=wx, wh=wh, gates=gates, c=c_all, tanh_c=tanh_c, h=h_all)
    return (h_all if return_sequences else h_all[-1]), cache


def lstm_backward(cell, cache: LstmCache, d_out, return_sequences: bool):
    """Backpropagate through one LSTM layer.

    ``d_out`` is (T, B, H) when ``return_sequences`` else (B, H) for the
    final hidden state.  Returns ``(dx, dwx, dwh, db)`` with the same
    layouts as the forward inputs.
    """
    t_len, batch, _ = cache.x.shape
    hidden = cache.wh.shape[1]
    dtype = cache.x.dtype

    dz = np.empty((t_len, batch, 4 * hidden), dtype=dtype)
    dh = np.zeros((batch, hidden), dtype=dtype)
    dc = np.zeros((batch, hidden), dtype=dtype)
    zeros_c = np.zeros((batch, hidden), dtype=dtype)

    for t in range(t_len - 1, -1, -1):
        if return_sequences:
            dh += d_out[t]
        elif t == t_len - 1:
            dh += d_out
        c_prev = cache.c[t - 1] if t > 0 else zeros_c
        # Updates dc in place to the carry entering step t-1.
        cell.backward_cell(dh, dc, cache.gates[t], c_prev, cache.tanh_c[t], dz[t])
        dh = dz[t] @ cache.wh

    dz_flat = dz.reshape(t_len * batch, 4 * hidden)
    dwx = dz_flat.T @ cache.x.reshape(t_len * batch, -1)
    # Hidden states entering each step: zeros at t=0, then h[0 .. T-2].
    h_prev = np.concatenate([zeros_c[None], cache.h[:-1]]) if t_len > 1 else zeros_c[None]
    dwh = dz_flat.T @ h_prev.reshape(t_len * batch, hidden)
    db = dz_flat.sum(axis=0)
    dx = (dz_flat @ cache.wx).reshape(cache.x.shape)
    return dx, dwx, dwh, db
