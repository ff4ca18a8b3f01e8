"""LSTM kernel backends: compiled extension with a numpy fallback.

The active backend is chosen once at import: the Cython extension when it
compiled, numpy otherwise.  Set ``ECIDS_BACKEND=numpy`` or
``ECIDS_BACKEND=cython`` to force a choice (forcing ``cython`` raises if
the extension is unavailable).  Both backends implement identical
formulas; results agree to floating-point round-off.
"""

from __future__ import annotations

import os
from functools import partial

from . import numpy_backend
from .driver import LstmCache, lstm_backward as _raw_backward, lstm_forward as _raw_forward

try:
    from . import _lstm_cy
except ImportError:  # pragma: no cover - depends on build environment
    _lstm_cy = None

_requested = os.environ.get("ECIDS_BACKEND", "").strip().lower()
if _requested == "numpy":
    _cell = numpy_backend
elif _requested == "cython":
    if _lstm_cy is None:
        raise ImportError("ECIDS_BACKEND=cython but the compiled extension is not available")
    _cell = _lstm_cy
elif _requested == "":
    _cell = _lstm_cy if _lstm_cy is not None else numpy_backend
else:
    raise ImportError(f"unknown ECIDS_BACKEND value {_requested!r}")

BACKEND = "cython" if _cell is _lstm_cy else "numpy"

lstm_forward = partial(_raw_forward, _cell)
lstm_backward = partial(_raw_backward, _cell)


def cell_backend(name: str):
    """Explicit cell-module lookup (used by the backend benchmark)."""
    if name == "numpy":
        return numpy_backend
    if name == "cython":
        if _lstm_cy is None:
            raise ValueError("compiled backend not available")
        return _lstm_cy
    raise ValueError(f"unknown backend {name!r}")


__all__ = ["BACKEND", "LstmCache", "lstm_forward", "lstm_backward", "cell_backend"]
