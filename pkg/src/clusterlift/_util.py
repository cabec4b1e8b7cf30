"""Small numeric helpers shared across modules."""

from __future__ import annotations

import numpy as np


def sigmoid(z):
    """Numerically stable logistic function, elementwise.

    Accepts scalars or arrays; returns the same shape.  Never overflows:
    the two exp branches are evaluated only where their argument is
    non-positive.
    """
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def freeze(arr: np.ndarray) -> np.ndarray:
    """Return a C-contiguous float64/int64 array marked read-only."""
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def fmt(value: float) -> str:
    """Shortest round-trip decimal representation of a float.

    Used for CSV emission so that files are byte-identical across runs
    and parse back to the exact same double.
    """
    return repr(float(value))
