"""Design jittering over a noise grid, bagged selection frequencies and
threshold rules on the delta-averaged frequencies."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted

from . import seeding
from ._validation import check_design, check_nonneg, check_response
from .selectors import SelectorSpec, _cd_solve, default_lambda

__all__ = [
    "NoiseGrid",
    "StabilityPath",
    "SelectionResult",
    "perturb_design",
    "selection_frequencies",
    "selection_counts",
    "stability_path",
    "delta_average",
    "largest_gap_select",
    "top_k_select",
    "theorem2_epsilon",
    "parse_grid",
    "JitterStabilitySelection",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseGrid:
    """Jitter levels (strictly increasing), replicates per level and base seed."""

    deltas: tuple
    B: int = 100
    base_seed: int = 0

    def __post_init__(self):
        deltas = tuple(float(d) for d in self.deltas)
        object.__setattr__(self, "deltas", deltas)
        if len(deltas) < 1:
            raise ValueError("the noise grid needs at least one level")
        if any(d < 0 or not math.isfinite(d) for d in deltas):
            raise ValueError("noise levels must be finite and nonnegative")
        if any(b <= a for a, b in zip(deltas, deltas[1:])):
            raise ValueError("noise levels must be strictly increasing")
        if int(self.B) < 1:
            raise ValueError(f"B must be at least 1, got {self.B}")

    @classmethod
    def linear(cls, lo, hi, m, B=100, base_seed=0):
        return cls(tuple(np.linspace(lo, hi, m)), B, base_seed)

    @classmethod
    def log(cls, lo, hi, m, B=100, base_seed=0):
        return cls(tuple(np.geomspace(lo, hi, m)), B, base_seed)

    @property
    def m(self):
        return len(self.deltas)


@dataclass
class StabilityPath:
    """Per-level selection frequencies, shape (m, p)."""

    grid: NoiseGrid
    freqs: np.ndarray
    selector: SelectorSpec
    counts: np.ndarray = None
    n_unconverged: int = 0

    def to_rows(self):
        """Long-format rows ``(delta, feature, frequency)``; features 1-based."""
        m, p = self.freqs.shape
        for i in range(m):
            for j in range(p):
                yield self.grid.deltas[i], j + 1, self.freqs[i, j]


@dataclass
class SelectionResult:
    """A selected feature set (0-based indices) and the rule behind it."""

    selected: np.ndarray
    rule: str
    s_hat: int = None
    tau_hat: float = None
    avg_freqs: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def selected_set(self):
        return frozenset(int(j) for j in self.selected)

    def mask(self, p):
        out = np.zeros(p, dtype=bool)
        out[self.selected] = True
        return out


def parse_grid(text, B=100, base_seed=0):
    """Parse ``lo:hi:count[:log]`` into a :class:`NoiseGrid`."""
    parts = text.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
        raise ValueError(f"grid must look like lo:hi:count[:log], got {text!r}")
    lo, hi, m = float(parts[0]), float(parts[1]), int(parts[2])
    if m == 1:
        return NoiseGrid((lo,), B, base_seed)
    if len(parts) == 4:
        return NoiseGrid.log(lo, hi, m, B, base_seed)
    return NoiseGrid.linear(lo, hi, m, B, base_seed)


def perturb_design(X, delta, seed):
    """Return ``X + W`` with ``W_ik ~ N(0, delta^2)`` i.i.d.; ``delta=0`` is a no-op."""
    delta = check_nonneg(delta, "delta")
    X = check_design(getattr(X, "values", X))
    if delta == 0:
        return X
    return X + delta * seeding.rng(seed).standard_normal(X.shape)


def _one_fit(X, y, spec, delta, seed):
    Xd = perturb_design(X, delta, seed) if delta > 0 else X
    beta, _, converged, _ = _cd_solve(
        Xd, y, spec.lam * spec.alpha, spec.lam * (1.0 - spec.alpha), int(spec.max_iter), float(spec.tol), False
    )
    return np.abs(beta) > spec.zero_tol, converged


def _map(fn, items, workers):
    if workers is None or workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def selection_counts(X, y, selector, delta, B, seed, workers=1):
    """Integer selection counts over ``B`` jittered fits at one level.

    Replicate ``b`` draws its jitter from ``child(seed, b)``. With ``delta=0``
    all replicates are the same fit, which is computed once.
    Returns ``(counts, n_unconverged)``.
    """
    X = check_design(getattr(X, "values", X))
    y = check_response(y, X.shape[0])
    delta = check_nonneg(delta, "delta")
    B = int(B)
    if B < 1:
        raise ValueError(f"B must be at least 1, got {B}")
    if delta == 0:
        sel, conv = _one_fit(X, y, selector, 0.0, None)
        return sel.astype(np.int64) * B, 0 if conv else B
    results = _map(lambda b: _one_fit(X, y, selector, delta, seeding.child(seed, b)), range(B), workers)
    counts = np.zeros(X.shape[1], dtype=np.int64)
    n_bad = 0
    for sel, conv in results:
        counts += sel
        n_bad += not conv
    return counts, n_bad


def selection_frequencies(X, y, selector, delta, B, seed, workers=1):
    """Fraction of ``B`` jittered fits at level ``delta`` selecting each feature.

    Non-converged fits are counted with the support they returned.
    """
    counts, n_bad = selection_counts(X, y, selector, delta, B, seed, workers)
    if n_bad:
        log.warning("%d of %d fits at delta=%g did not converge", n_bad, B, delta)
    return counts / B


def stability_path(X, y, selector, grid, workers=1):
    """Selection frequencies for every level of ``grid``.

    Level ``i`` (position in the sorted grid) uses seed ``child(base_seed, i)``.
    """
    X = check_design(getattr(X, "values", X))
    y = check_response(y, X.shape[0])
    tasks = [(i, b) for i, d in enumerate(grid.deltas) for b in range(grid.B if d > 0 else 1)]

    def run(task):
        i, b = task
        d = grid.deltas[i]
        return _one_fit(X, y, selector, d, seeding.child(grid.base_seed, i, b) if d > 0 else None)

    results = _map(run, tasks, workers)
    counts = np.zeros((grid.m, X.shape[1]), dtype=np.int64)
    n_bad = 0
    for (i, b), (sel, conv) in zip(tasks, results):
        w = 1 if grid.deltas[i] > 0 else grid.B
        counts[i] += sel.astype(np.int64) * w
        n_bad += (not conv) * w
    if n_bad:
        log.warning("%d of %d jittered fits did not converge", n_bad, grid.m * grid.B)
    return StabilityPath(grid, counts / grid.B, selector, counts, n_bad)


def delta_average(path):
    """Mean frequency of each feature across the noise levels."""
    freqs = path.freqs if isinstance(path, StabilityPath) else np.asarray(path, dtype=float)
    return freqs.mean(axis=0)


def largest_gap_select(avg_freqs):
    """Threshold at the largest drop in the sorted averaged frequencies.

    ``s_hat`` is the position of the largest adjacent gap (the smallest one on
    ties), ``tau_hat`` the midpoint of the two values around it, and every
    feature with frequency ``>= tau_hat`` is selected. If all frequencies are
    equal there is no gap: the selection is empty and
    ``diagnostics["degenerate"]`` is set.
    """
    f = np.asarray(avg_freqs, dtype=float)
    p = f.size
    if p < 2:
        raise ValueError("largest-gap selection needs at least two features")
    order = np.argsort(-f, kind="stable")
    fs = f[order]
    gaps = fs[:-1] - fs[1:]
    k = int(np.argmax(gaps))
    if gaps[k] <= 0:
        return SelectionResult(np.array([], dtype=np.int64), "largest_gap", 0, None, f,
                               {"degenerate": "all frequencies equal; no gap"})
    s_hat = k + 1
    tau = 0.5 * (fs[k] + fs[k + 1])
    selected = np.flatnonzero(f >= tau)
    diag = {}
    if selected.size != s_hat:
        diag["ties_at_threshold"] = int(selected.size - s_hat)
    return SelectionResult(selected, "largest_gap", s_hat, float(tau), f, diag)


def top_k_select(avg_freqs, k):
    """The ``k`` features with largest frequency; ties go to the lower index."""
    f = np.asarray(avg_freqs, dtype=float)
    p = f.size
    k = int(k)
    if not 1 <= k <= p:
        raise ValueError(f"k must lie in 1..{p}, got {k}")
    order = np.lexsort((np.arange(p), -f))
    selected = np.sort(order[:k])
    return SelectionResult(selected, "top_k", k, float(f[order[k - 1]]), f)


def theorem2_epsilon(m, p, B, alpha):
    """Uniform Hoeffding deviation ``sqrt(log(2 m p / alpha) / (2 B))``.

    With probability at least ``1 - alpha`` every per-level frequency is
    within this distance of its expectation.
    """
    if m < 1 or p < 1 or B < 1:
        raise ValueError("m, p and B must be positive")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return math.sqrt(math.log(2.0 * m * p / alpha) / (2.0 * B))


class JitterStabilitySelection(SelectorMixin, BaseEstimator):
    """Feature selection by design jittering and delta-averaged frequencies.

    For every noise level in ``deltas`` the base selector is refit on ``B``
    copies of ``X`` with i.i.d. Gaussian noise of that standard deviation
    added, selection frequencies are averaged over levels, and features are
    selected by the largest-gap rule or, if ``n_features_to_select`` is
    given, as the top ``k``.

    Parameters
    ----------
    deltas : sequence of float, default=10 values evenly spaced in [0.05, 2.5]
    B : int, default=100
        Jittered fits per noise level.
    lam : float or "auto", default="auto"
        Fixed regularization level; ``"auto"`` is ``sqrt(log(p) / n)``.
    alpha : float, default=1.0
        l1 weight of the base selector (1 gives the Lasso).
    n_features_to_select : int or None, default=None
    random_state : int, default=0
    n_jobs : int, default=1

    Attributes
    ----------
    path_ : StabilityPath
    avg_freqs_ : ndarray of shape (n_features,)
    result_ : SelectionResult
    """

    def __init__(self, deltas=None, B=100, lam="auto", alpha=1.0, n_features_to_select=None,
                 random_state=0, n_jobs=1, tol=1e-7, max_iter=100_000):
        self.deltas = deltas
        self.B = B
        self.lam = lam
        self.alpha = alpha
        self.n_features_to_select = n_features_to_select
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X = check_design(X)
        y = check_response(y, X.shape[0])
        n, p = X.shape
        deltas = np.linspace(0.05, 2.5, 10) if self.deltas is None else np.sort(np.asarray(self.deltas, float))
        lam = default_lambda(n, p) if self.lam == "auto" else float(self.lam)
        kind = "lasso" if self.alpha == 1.0 else "enet"
        self.selector_ = SelectorSpec(kind, lam, float(self.alpha), self.max_iter, self.tol)
        grid = NoiseGrid(tuple(deltas), int(self.B), int(self.random_state))
        self.path_ = stability_path(X, y, self.selector_, grid, workers=self.n_jobs)
        self.avg_freqs_ = delta_average(self.path_)
        if self.n_features_to_select is None:
            self.result_ = largest_gap_select(self.avg_freqs_)
        else:
            self.result_ = top_k_select(self.avg_freqs_, self.n_features_to_select)
        self.n_features_in_ = p
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "result_")
        return self.result_.mask(self.n_features_in_)
