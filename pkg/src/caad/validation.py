"""Small input-validation helpers used across modules."""
from __future__ import annotations

import numpy as np


def as_finite_vector(x, name="vector", dtype=np.float64):
    """Coerce to a 1-D numpy array and reject NaN/Inf; returns a copy-free view when possible."""
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite components")
    return arr


def check_length(x, expected, name="vector"):
    if len(x) != expected:
        raise ValueError(f"{name} has length {len(x)}, expected {expected}")


def check_positive_int(value, name):
    if not isinstance(value, (int, np.integer)) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
