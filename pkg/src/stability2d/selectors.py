"""Fixed-tuning sparse linear selectors solved by cyclic coordinate descent.

The objective minimised for both Lasso and Elastic Net is::

    (1 / 2n) ||y - X b||^2 + lam * (alpha * ||b||_1 + (1 - alpha) / 2 * ||b||^2)

No intercept is fitted and ``y`` is not centred; callers pass standardized
designs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import seeding
from ._validation import check_design, check_response

__all__ = [
    "SelectorSpec",
    "CoefficientVector",
    "soft_threshold",
    "fit",
    "support",
    "default_lambda",
    "cv_lambda_1se",
    "lambda_max",
    "LassoSelector",
    "ElasticNetSelector",
]

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 100_000
POLISH_EVERY = 5
MAX_NEWTON_DROPS = 5


@dataclass(frozen=True)
class SelectorSpec:
    """Tuning of a fixed-lambda sparse linear selector.

    ``kind`` is ``"lasso"`` or ``"enet"``; a Lasso always has ``alpha == 1``.
    """

    kind: str = "lasso"
    lam: float = 0.1
    alpha: float = 1.0
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    zero_tol: float = 0.0

    def __post_init__(self):
        if self.kind not in ("lasso", "enet"):
            raise ValueError(f"kind must be 'lasso' or 'enet', got {self.kind!r}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be a positive finite real, got {self.lam}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.kind == "lasso" and self.alpha != 1.0:
            raise ValueError("a lasso spec must have alpha == 1")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")
        if self.zero_tol < 0:
            raise ValueError(f"zero_tol must be nonnegative, got {self.zero_tol}")

    @classmethod
    def lasso(cls, lam, **kw):
        return cls(kind="lasso", lam=float(lam), alpha=1.0, **kw)

    @classmethod
    def enet(cls, lam, alpha=0.5, **kw):
        return cls(kind="enet", lam=float(lam), alpha=float(alpha), **kw)

    def with_lambda(self, lam):
        return SelectorSpec(self.kind, float(lam), self.alpha, self.max_iter, self.tol, self.zero_tol)


@dataclass
class CoefficientVector:
    beta: np.ndarray
    n_iter: int
    converged: bool
    objective: float


def soft_threshold(z, gamma):
    """Return ``sign(z) * max(|z| - gamma, 0)``."""
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    out = np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)
    return float(out) if np.ndim(out) == 0 else out


@numba.njit(cache=True, nogil=True)
def _objective(X, y, beta, l1, l2):
    n = X.shape[0]
    r = y - X @ beta
    return 0.5 * (r @ r) / n + l1 * np.abs(beta).sum() + 0.5 * l2 * (beta @ beta)


@numba.njit(cache=True, nogil=True)
def _coordinate(Xt, r, beta, colsq, j, n, l1, l2):
    # Xt is the transposed design so that column j is contiguous. Updates
    # beta[j] and the residual in place, returns the absolute change.
    old = beta[j]
    if colsq[j] == 0.0:
        return 0.0
    xj = Xt[j]
    z = 0.0
    for i in range(n):
        z += xj[i] * r[i]
    z = z / n + colsq[j] * old
    if z > l1:
        new = (z - l1) / (colsq[j] + l2)
    elif z < -l1:
        new = (z + l1) / (colsq[j] + l2)
    else:
        new = 0.0
    d = new - old
    if d != 0.0:
        for i in range(n):
            r[i] -= d * xj[i]
        beta[j] = new
    return abs(d)


@numba.njit(cache=True, nogil=True)
def _newton_step(X, y, beta, r, l1, l2):
    """Exact minimisation on the current support with signs held fixed.

    Moves ``beta`` toward the solution of the sign-constrained normal
    equations; if a coordinate would change sign the step stops where it
    reaches zero and that coordinate leaves the support (one pass of the
    Osborne-Presnell-Turlach active-set method). The objective never
    increases. ``beta`` and ``r`` are updated in place. Returns 2 if the
    full step was taken, 1 for a truncated step, 0 if the system was
    singular and nothing changed.
    """
    n = X.shape[0]
    idx = np.flatnonzero(beta)
    k = idx.size
    if k == 0 or (k > n and l2 == 0.0):
        return 0
    XA = np.empty((n, k))
    for c in range(k):
        XA[:, c] = X[:, idx[c]]
    G = XA.T @ XA / n
    rhs = XA.T @ y / n
    for c in range(k):
        G[c, c] += l2
        rhs[c] -= l1 * np.sign(beta[idx[c]])
    try:
        bA = np.linalg.solve(G, rhs)
    except Exception:  # noqa: BLE001
        return 0
    t = 1.0
    drop = -1
    for c in range(k):
        if not np.isfinite(bA[c]):
            return 0
        old = beta[idx[c]]
        if np.sign(bA[c]) != np.sign(old):
            tc = old / (old - bA[c])
            if tc < t:
                t = tc
                drop = c
    for c in range(k):
        old = beta[idx[c]]
        beta[idx[c]] = old + t * (bA[c] - old)
    if drop >= 0:
        beta[idx[drop]] = 0.0
    r[:] = y - X @ beta
    return 2 if drop < 0 else 1


@numba.njit(cache=True, nogil=True)
def _cd_solve(X, y, l1, l2, max_iter, tol, check_descent):
    """Cyclic coordinate descent with active-set inner sweeps.

    Once the support and signs have survived ``POLISH_EVERY`` inner sweeps
    unchanged, the problem restricted to that support is solved exactly by
    :func:`_newton_step` and a full sweep lets violating coordinates enter. Near-saturated fits (support close to
    n) otherwise need tens of thousands of sweeps. Returns
    ``(beta, n_sweeps, converged, descent_ok)``; only a full sweep with max
    coordinate change <= tol sets converged.
    """
    n, p = X.shape
    Xt = np.ascontiguousarray(X.T)
    beta = np.zeros(p)
    r = y.copy()
    colsq = np.empty(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += Xt[j, i] * Xt[j, i]
        colsq[j] = s / n
    active = np.empty(p, dtype=np.int64)
    sweeps = 0
    descent_ok = True
    prev_obj = np.inf
    while sweeps < max_iter:
        max_d = 0.0
        for j in range(p):
            d = _coordinate(Xt, r, beta, colsq, j, n, l1, l2)
            if d > max_d:
                max_d = d
        sweeps += 1
        if check_descent:
            obj = _objective(X, y, beta, l1, l2)
            if obj > prev_obj + 1e-12 * max(1.0, abs(prev_obj)):
                descent_ok = False
            prev_obj = obj
        if max_d <= tol:
            return beta, sweeps, True, descent_ok
        n_act = 0
        for j in range(p):
            if beta[j] != 0.0:
                active[n_act] = j
                n_act += 1
        stable = 0
        while sweeps < max_iter:
            max_d = 0.0
            changed = False
            for k in range(n_act):
                j = active[k]
                was = beta[j]
                d = _coordinate(Xt, r, beta, colsq, j, n, l1, l2)
                if d > max_d:
                    max_d = d
                if was * beta[j] <= 0.0 and (was != 0.0 or beta[j] != 0.0):
                    changed = True
            sweeps += 1
            stable = 0 if changed else stable + 1
            if check_descent:
                obj = _objective(X, y, beta, l1, l2)
                if obj > prev_obj + 1e-12 * max(1.0, abs(prev_obj)):
                    descent_ok = False
                prev_obj = obj
            if max_d <= tol:
                break
            if stable >= POLISH_EVERY:
                for _ in range(MAX_NEWTON_DROPS):
                    if _newton_step(X, y, beta, r, l1, l2) != 1:
                        break
                if check_descent:
                    obj = _objective(X, y, beta, l1, l2)
                    if obj > prev_obj + 1e-12 * max(1.0, abs(prev_obj)):
                        descent_ok = False
                    prev_obj = obj
                break
    return beta, sweeps, False, descent_ok


def fit(X, y, spec, check_descent=False):
    """Fit a fixed-lambda Lasso / Elastic Net by coordinate descent.

    Parameters
    ----------
    X : ndarray of shape (n, p)
    y : ndarray of shape (n,)
    spec : SelectorSpec
    check_descent : bool, default=False
        Track the objective after every sweep and raise ``AssertionError``
        if it ever increases. Slow; meant for debugging and tests.

    Returns
    -------
    CoefficientVector
        ``converged`` is False when ``max_iter`` sweeps were exhausted; the
        caller decides what to do with such a fit.
    """
    X = check_design(X)
    y = check_response(y, X.shape[0])
    l1 = spec.lam * spec.alpha
    l2 = spec.lam * (1.0 - spec.alpha)
    beta, sweeps, converged, descent_ok = _cd_solve(
        X, y, l1, l2, int(spec.max_iter), float(spec.tol), bool(check_descent)
    )
    if check_descent and not descent_ok:
        raise AssertionError("coordinate descent objective increased between sweeps")
    obj = float(_objective(X, y, beta, l1, l2))
    return CoefficientVector(beta=beta, n_iter=int(sweeps), converged=bool(converged), objective=obj)


def support(beta, zero_tol=0.0):
    """Indices ``j`` with ``|beta_j| > zero_tol`` (0-based, ascending)."""
    if isinstance(beta, CoefficientVector):
        beta = beta.beta
    beta = np.asarray(beta, dtype=float)
    return np.flatnonzero(np.abs(beta) > zero_tol)


def default_lambda(n, p):
    """The fixed level ``sqrt(log(p) / n)`` (natural log)."""
    if n < 1 or p < 2:
        raise ValueError(f"need n >= 1 and p >= 2, got n={n}, p={p}")
    return math.sqrt(math.log(p) / n)


def lambda_max(X, y, alpha=1.0):
    """Smallest lambda for which the all-zero vector is optimal."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.max(np.abs(X.T @ y)) / X.shape[0] / alpha)


def cv_curve(X, y, lambdas, alpha, folds, seed):
    """K-fold CV mean squared error for every lambda; shape (folds, len(lambdas))."""
    n = X.shape[0]
    rng = seeding.rng(seed)
    assign = rng.permutation(np.arange(n) % folds)
    errs = np.empty((folds, len(lambdas)))
    l1s = np.asarray(lambdas) * alpha
    l2s = np.asarray(lambdas) * (1.0 - alpha)
    for k in range(folds):
        test = assign == k
        Xtr, ytr = np.ascontiguousarray(X[~test]), np.ascontiguousarray(y[~test])
        Xte, yte = X[test], y[test]
        for i in range(len(lambdas)):
            beta, _, _, _ = _cd_solve(Xtr, ytr, l1s[i], l2s[i], DEFAULT_MAX_ITER, DEFAULT_TOL, False)
            resid = yte - Xte @ beta
            errs[k, i] = resid @ resid / len(yte)
    return errs


def cv_lambda_1se(X, y, alpha=1.0, folds=10, seed=0, n_lambda=100, return_details=False):
    """Pick lambda by the one-standard-error rule of K-fold cross-validation.

    The grid is geometric from ``lambda_max`` down to ``1e-3 * lambda_max``.
    Returns the largest lambda whose mean CV error is within one standard
    error of the minimum. ``y`` is used as given (not standardized).
    """
    X = check_design(X)
    y = check_response(y, X.shape[0])
    n = X.shape[0]
    if folds < 2 or n < folds:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    lmax = lambda_max(X, y, alpha)
    if lmax == 0.0:
        raise ValueError("lambda_max is zero (response orthogonal to every column); CV is degenerate")
    lambdas = np.geomspace(lmax, 1e-3 * lmax, n_lambda)
    errs = cv_curve(X, y, lambdas, alpha, folds, seed)
    mean = errs.mean(axis=0)
    se = errs.std(axis=0, ddof=1) / math.sqrt(folds)
    i_min = int(np.argmin(mean))
    ok = np.flatnonzero(mean <= mean[i_min] + se[i_min])
    lam = float(lambdas[ok.min()])
    if return_details:
        return lam, {"lambdas": lambdas, "mean": mean, "se": se, "lambda_min": float(lambdas[i_min])}
    return lam


class LassoSelector(RegressorMixin, BaseEstimator):
    """Lasso at a fixed lambda, with ``get_support`` for selection.

    Parameters
    ----------
    lam : float or "auto", default="auto"
        Regularization level. ``"auto"`` uses ``sqrt(log(p) / n)``.
    tol, max_iter, zero_tol : see :class:`SelectorSpec`.
    """

    _kind = "lasso"

    def __init__(self, lam="auto", tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, zero_tol=0.0):
        self.lam = lam
        self.tol = tol
        self.max_iter = max_iter
        self.zero_tol = zero_tol

    def _alpha(self):
        return 1.0

    def spec_for(self, n, p):
        lam = default_lambda(n, p) if self.lam == "auto" else float(self.lam)
        return SelectorSpec(self._kind, lam, self._alpha(), self.max_iter, self.tol, self.zero_tol)

    def fit(self, X, y):
        X = check_design(X)
        y = check_response(y, X.shape[0])
        self.spec_ = self.spec_for(*X.shape)
        res = fit(X, y, self.spec_)
        self.coef_ = res.beta
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        self.objective_ = res.objective
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return check_design(X) @ self.coef_

    def get_support(self, indices=False):
        check_is_fitted(self, "coef_")
        idx = support(self.coef_, self.zero_tol)
        if indices:
            return idx
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[idx] = True
        return mask


class ElasticNetSelector(LassoSelector):
    """Elastic Net at a fixed lambda; ``alpha`` weights the l1 part."""

    _kind = "enet"

    def __init__(self, lam="auto", alpha=0.5, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, zero_tol=0.0):
        super().__init__(lam=lam, tol=tol, max_iter=max_iter, zero_tol=zero_tol)
        self.alpha = alpha

    def _alpha(self):
        return float(self.alpha)
