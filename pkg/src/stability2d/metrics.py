"""Support-recovery F1 and the Nogueira selection-stability index."""

from __future__ import annotations

import logging
import math

import numpy as np

__all__ = ["f1_score", "nogueira_stability", "selection_matrix"]

log = logging.getLogger(__name__)


def f1_score(selected, truth):
    """F1 of a selected set against the true support.

    Two empty sets score 1; exactly one empty set scores 0.
    """
    a = {int(j) for j in selected}
    b = {int(j) for j in truth}
    if not a and not b:
        return 1.0
    tp = len(a & b)
    denom = 2 * tp + len(a - b) + len(b - a)
    return 2.0 * tp / denom


def selection_matrix(selections, p):
    """Stack selected index sets into an R x p binary matrix."""
    Z = np.zeros((len(selections), p), dtype=np.int8)
    for r, sel in enumerate(selections):
        Z[r, np.asarray(list(sel), dtype=np.int64)] = 1
    return Z


def nogueira_stability(Z):
    """Stability of the selections in the rows of binary matrix ``Z``.

    Uses the unbiased per-feature selection variance, normalised by its value
    under random selection of the same average size. Equal to 1 for
    identical rows; NaN (with a logged warning) when the average selection
    size is 0 or p.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise ValueError("Z must be a 2-D binary matrix")
    R, p = Z.shape
    if R < 2:
        raise ValueError("stability needs at least two selections")
    if not np.all((Z == 0) | (Z == 1)):
        raise ValueError("Z must be binary")
    phat = Z.mean(axis=0)
    kbar = Z.sum(axis=1).mean()
    if kbar <= 0 or kbar >= p:
        log.warning("stability undefined: average selection size %g of %d", kbar, p)
        return math.nan
    s2 = R / (R - 1) * phat * (1.0 - phat)
    q = kbar / p
    return float(1.0 - s2.mean() / (q * (1.0 - q)))
