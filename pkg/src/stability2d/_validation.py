"""Input checks shared by the estimators and free functions."""

from __future__ import annotations

import numpy as np

__all__ = ["check_design", "check_response", "check_seed", "check_nonneg", "DegenerateColumnError"]


class DegenerateColumnError(ValueError):
    """A column has zero variance where a scale is required."""

    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column} is constant; cannot standardize")


def check_design(X, name="X"):
    """Return ``X`` as a C-contiguous float64 2-D array with finite entries."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or Inf")
    return X


def check_response(y, n, name="y"):
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.ndim != 1:
        y = y.ravel()
    if y.shape[0] != n:
        raise ValueError(f"{name} has length {y.shape[0]}, expected {n}")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains NaN or Inf")
    return y


def check_seed(seed):
    if seed is None:
        return None
    if isinstance(seed, (np.random.SeedSequence, np.random.Generator)):
        return seed
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    return seed


def check_nonneg(value, name):
    value = float(value)
    if not value >= 0:
        raise ValueError(f"{name} must be nonnegative, got {value}")
    return value
