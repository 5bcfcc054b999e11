"""Comparison selectors: a single fixed-lambda fit and half-sample
Stability Selection at a fixed lambda."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted

from . import seeding
from ._validation import check_design, check_response
from .jitter import SelectionResult, _map
from .selectors import SelectorSpec, _cd_solve, default_lambda, fit, support

__all__ = [
    "StabilitySelectionSpec",
    "single_fit_select",
    "subsample_counts",
    "stability_selection",
    "threshold_select",
    "StabilitySelection",
]


@dataclass(frozen=True)
class StabilitySelectionSpec:
    B: int
    tau: float
    selector: SelectorSpec
    seed: int = 0

    def __post_init__(self):
        if int(self.B) < 2:
            raise ValueError(f"B must be at least 2, got {self.B}")
        if not 0.5 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0.5, 1], got {self.tau}")


def single_fit_select(X, y, selector):
    """Support of one fit; no threshold is involved (``tau_hat`` is None)."""
    res = fit(X, y, selector)
    sel = support(res, selector.zero_tol)
    return SelectionResult(sel, "threshold", int(sel.size), None, None,
                           {"converged": res.converged, "n_iter": res.n_iter})


def subsample_counts(X, y, selector, B, seed, workers=1):
    """Selection counts over ``B`` fits on random halves of the rows.

    Resample ``b`` draws ``floor(n/2)`` rows without replacement from
    ``child(seed, b)``. Columns are not re-standardized and ``lam`` is kept.
    Returns ``(counts, n_unconverged)``.
    """
    X = check_design(getattr(X, "values", X))
    y = check_response(y, X.shape[0])
    n = X.shape[0]
    half = n // 2
    if half < 2:
        raise ValueError(f"half-samples need at least 2 rows, n={n} gives {half}")
    l1 = selector.lam * selector.alpha
    l2 = selector.lam * (1.0 - selector.alpha)

    def run(b):
        rows = np.sort(seeding.rng(seed, b).choice(n, size=half, replace=False))
        beta, _, conv, _ = _cd_solve(np.ascontiguousarray(X[rows]), np.ascontiguousarray(y[rows]),
                                     l1, l2, int(selector.max_iter), float(selector.tol), False)
        return np.abs(beta) > selector.zero_tol, conv

    counts = np.zeros(X.shape[1], dtype=np.int64)
    n_bad = 0
    for sel, conv in _map(run, range(int(B)), workers):
        counts += sel
        n_bad += not conv
    return counts, n_bad


def threshold_select(freqs, tau):
    freqs = np.asarray(freqs, dtype=float)
    return SelectionResult(np.flatnonzero(freqs >= tau), "threshold", None, float(tau), freqs)


def stability_selection(X, y, spec, workers=1):
    """Half-sample Stability Selection; returns ``(freqs, SelectionResult)``."""
    counts, n_bad = subsample_counts(X, y, spec.selector, spec.B, spec.seed, workers)
    freqs = counts / spec.B
    res = threshold_select(freqs, spec.tau)
    res.diagnostics["n_unconverged"] = n_bad
    return freqs, res


class StabilitySelection(SelectorMixin, BaseEstimator):
    """Half-sample Stability Selection with a fixed base-selector lambda.

    Parameters
    ----------
    tau : float, default=0.6
    B : int, default=100
    lam : float or "auto", default="auto"
    alpha : float, default=1.0
    random_state : int, default=0
    n_jobs : int, default=1
    """

    def __init__(self, tau=0.6, B=100, lam="auto", alpha=1.0, random_state=0, n_jobs=1):
        self.tau = tau
        self.B = B
        self.lam = lam
        self.alpha = alpha
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y):
        X = check_design(X)
        y = check_response(y, X.shape[0])
        n, p = X.shape
        lam = default_lambda(n, p) if self.lam == "auto" else float(self.lam)
        kind = "lasso" if self.alpha == 1.0 else "enet"
        spec = StabilitySelectionSpec(int(self.B), float(self.tau),
                                      SelectorSpec(kind, lam, float(self.alpha)), int(self.random_state))
        self.freqs_, self.result_ = stability_selection(X, y, spec, workers=self.n_jobs)
        self.n_features_in_ = p
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "result_")
        return self.freqs_ >= self.tau
