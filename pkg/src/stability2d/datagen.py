"""Synthetic regression problems with block-structured correlation.

Features in the active set share one correlation, the remaining features
another, and every relevant/irrelevant pair a third. The matrix is projected
to the nearest positive definite matrix (eigenvalue clipping), put back in
correlation form and used to draw a latent Gaussian design.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import seeding
from ._validation import DegenerateColumnError, check_design, check_nonneg

__all__ = [
    "CovarianceSpec",
    "DesignMatrix",
    "GroundTruth",
    "build_block_covariance",
    "nearest_pd",
    "correlation_form",
    "sample_mvn",
    "standardize",
    "generate_response",
    "add_observation_noise",
    "write_matrix_csv",
    "Standardizer",
]

PD_FLOOR = 1e-8


@dataclass(frozen=True)
class CovarianceSpec:
    """Block correlation layout. ``active_set`` holds 0-based column indices."""

    p: int
    active_set: tuple = ()
    rho_rel: float = 0.5
    rho_irr: float = 0.05
    rho_mix: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "active_set", tuple(int(j) for j in self.active_set))
        if self.p < 1:
            raise ValueError(f"p must be positive, got {self.p}")
        for name in ("rho_rel", "rho_irr", "rho_mix"):
            rho = getattr(self, name)
            if not -1.0 < rho < 1.0:
                raise ValueError(f"{name} must lie in (-1, 1), got {rho}")
        if len(set(self.active_set)) != len(self.active_set):
            raise ValueError("active_set indices must be distinct")
        if any(j < 0 or j >= self.p for j in self.active_set):
            raise ValueError(f"active_set indices must lie in 0..{self.p - 1}")


@dataclass
class DesignMatrix:
    """An n x p design plus the column statistics used to standardize it."""

    values: np.ndarray
    col_means: np.ndarray = None
    col_scales: np.ndarray = None
    standardized: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        p = self.values.shape[1]
        if self.col_means is None:
            self.col_means = np.zeros(p)
        if self.col_scales is None:
            self.col_scales = np.ones(p)

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class GroundTruth:
    beta: np.ndarray
    sigma_eps: float = 1.0
    active_set: tuple = field(init=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "active_set", tuple(int(j) for j in np.flatnonzero(beta)))
        check_nonneg(self.sigma_eps, "sigma_eps")

    @classmethod
    def from_support(cls, p, active_set, coefficients, sigma_eps=1.0):
        if len(active_set) != len(coefficients):
            raise ValueError("active_set and coefficients differ in length")
        beta = np.zeros(p)
        beta[list(active_set)] = coefficients
        return cls(beta, sigma_eps)


def build_block_covariance(spec):
    """Block correlation matrix for ``spec`` (not yet PD-projected)."""
    p = spec.p
    rel = np.zeros(p, dtype=bool)
    rel[list(spec.active_set)] = True
    M = np.where(np.logical_and.outer(rel, rel), spec.rho_rel,
                 np.where(np.logical_or.outer(rel, rel), spec.rho_mix, spec.rho_irr))
    np.fill_diagonal(M, 1.0)
    return M


def nearest_pd(M, pd_floor=PD_FLOOR):
    """Clip the eigenvalues of symmetric ``M`` at ``pd_floor``.

    Matrices whose smallest eigenvalue already meets the floor are returned
    unchanged (as a copy).
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    if pd_floor <= 0:
        raise ValueError("pd_floor must be positive")
    w, V = np.linalg.eigh(M)
    if w[0] >= pd_floor:
        return M.copy()
    out = (V * np.maximum(w, pd_floor)) @ V.T
    out = 0.5 * (out + out.T)
    # Rounding in the reconstruction can leave the floor slightly violated.
    w2 = np.linalg.eigvalsh(out)
    if w2[0] < pd_floor:
        out[np.diag_indices_from(out)] += pd_floor - w2[0]
    return out


def correlation_form(M):
    """Rescale a covariance to unit diagonal."""
    d = 1.0 / np.sqrt(np.diag(M))
    out = M * np.outer(d, d)
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 1.0)
    return out


def projected_covariance(spec, pd_floor=PD_FLOOR):
    """Block matrix, nearest-PD projection, back to correlation form."""
    M = build_block_covariance(spec)
    P = nearest_pd(M, pd_floor)
    if P is M or np.array_equal(P, M):
        return P
    return correlation_form(P)


def sample_mvn(n, Sigma, seed):
    """Draw ``n`` rows from N(0, Sigma) as ``Z @ L.T`` with ``Sigma = L L^T``."""
    Sigma = np.asarray(Sigma, dtype=np.float64)
    try:
        L = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"covariance is not positive definite: {exc}") from None
    Z = seeding.rng(seed).standard_normal((int(n), Sigma.shape[0]))
    return DesignMatrix(Z @ L.T)


def standardize(X):
    """Centre each column and scale it to unit sample SD (n - 1 divisor)."""
    values = check_design(getattr(X, "values", X))
    n = values.shape[0]
    if n < 2:
        raise ValueError("standardize needs at least two rows")
    means = values.mean(axis=0)
    centred = values - means
    scales = np.sqrt((centred ** 2).sum(axis=0) / (n - 1))
    bad = np.flatnonzero(scales <= 1e-12 * np.maximum(1.0, np.abs(means)))
    if bad.size:
        raise DegenerateColumnError(int(bad[0]))
    return DesignMatrix(centred / scales, means, scales, standardized=True)


def generate_response(X0, truth, seed):
    """``y = X0 @ beta + eps`` with ``eps ~ N(0, sigma_eps^2)`` i.i.d."""
    values = np.asarray(getattr(X0, "values", X0), dtype=np.float64)
    if values.shape[1] != truth.beta.shape[0]:
        raise ValueError(f"design has {values.shape[1]} columns, beta has {truth.beta.shape[0]}")
    signal = values @ truth.beta
    if truth.sigma_eps == 0:
        return signal
    return signal + truth.sigma_eps * seeding.rng(seed).standard_normal(values.shape[0])


def add_observation_noise(X0, delta_obs, seed):
    """Observed design ``X0 + W`` with ``W_ik ~ N(0, delta_obs^2)``."""
    delta_obs = check_nonneg(delta_obs, "delta_obs")
    values = np.asarray(getattr(X0, "values", X0), dtype=np.float64)
    if delta_obs == 0:
        return X0 if isinstance(X0, DesignMatrix) else DesignMatrix(values)
    W = seeding.rng(seed).standard_normal(values.shape)
    out = values + delta_obs * W
    return DesignMatrix(out)


def write_matrix_csv(path, values, header=None):
    values = np.asarray(getattr(values, "values", values))
    p = values.shape[1]
    header = header or [f"feature_{j + 1}" for j in range(p)]
    np.savetxt(path, values, delimiter=",", header=",".join(header), comments="", fmt="%.17g")


class Standardizer(TransformerMixin, BaseEstimator):
    """Column centring and unit-SD scaling as a transformer (n - 1 divisor)."""

    def fit(self, X, y=None):
        d = standardize(X)
        self.mean_, self.scale_ = d.col_means, d.col_scales
        self.n_features_in_ = d.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        X = check_design(getattr(X, "values", X))
        return (X - self.mean_) / self.scale_
