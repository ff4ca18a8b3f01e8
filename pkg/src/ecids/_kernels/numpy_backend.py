"""Pure-numpy LSTM cell math (fallback when the extension is absent)."""

from __future__ import annotations

import numpy as np


def _sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def forward_cell(z, c_prev, gates_out, c_out, tanh_c_out, h_out) -> None:
    """Gate activations and state update for one timestep.

    ``z`` holds the pre-activation [i | f | g | o] blocks, shape (B, 4H).
    Results are written into the provided output arrays.
    """
    hidden = c_prev.shape[1]
    i = _sigmoid(z[:, :hidden])
    f = _sigmoid(z[:, hidden : 2 * hidden])
    g = np.tanh(z[:, 2 * hidden : 3 * hidden])
    o = _sigmoid(z[:, 3 * hidden :])
    gates_out[:, :hidden] = i
    gates_out[:, hidden : 2 * hidden] = f
    gates_out[:, 2 * hidden : 3 * hidden] = g
    gates_out[:, 3 * hidden :] = o
    np.multiply(f, c_prev, out=c_out)
    c_out += i * g
    np.tanh(c_out, out=tanh_c_out)
    np.multiply(o, tanh_c_out, out=h_out)


def backward_cell(dh, dc, gates, c_prev, tanh_c, dz_out) -> None:
    """Gradient of one timestep; ``dc`` is updated in place to the carry.

    ``dh`` is the total incoming hidden-state gradient at this step and
    ``dc`` the cell-state carry from the following step.  ``dz_out``
    receives the pre-activation gradients in [i | f | g | o] layout.
    """
    hidden = dc.shape[1]
    i = gates[:, :hidden]
    f = gates[:, hidden : 2 * hidden]
    g = gates[:, 2 * hidden : 3 * hidden]
    o = gates[:, 3 * hidden :]

    dc_total = dc + dh * o * (1.0 - tanh_c * tanh_c)
    dz_out[:, :hidden] = dc_total * g * i * (1.0 - i)
    dz_out[:, hidden : 2 * hidden] = dc_total * c_prev * f * (1.0 - f)
    dz_out[:, 2 * hidden : 3 * hidden] = dc_total * i * (1.0 - g * g)
    dz_out[:, 3 * hidden :] = dh * tanh_c * o * (1.0 - o)
    np.multiply(dc_total, f, out=dc)
