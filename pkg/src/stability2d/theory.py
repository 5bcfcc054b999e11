"""Irrepresentability under design perturbation: the quantities behind the
deterministic and Gaussian-noise bounds, and Monte Carlo checks of them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from ._validation import check_design, check_nonneg
from .jitter import theorem2_epsilon

__all__ = [
    "GramSummary",
    "Lemma1Constants",
    "Theorem1Quantities",
    "CheckReport",
    "gram",
    "centered_gram",
    "matrix_inf_norm",
    "ic_norm",
    "ic_margin",
    "lemma1_delta0",
    "lemma1_falsify",
    "theorem1_epsilon",
    "theorem1_gate",
    "verify_theorem1_mc",
    "remark2_variance_check",
    "verify_theorem2_mc",
]

COND_LIMIT = 1e12


@dataclass
class GramSummary:
    sigma: np.ndarray
    active_set: tuple
    ic_norm: float
    eta: float
    invertible_SS: bool


@dataclass(frozen=True)
class Lemma1Constants:
    delta1: float
    a: float
    b: float
    delta0: float

    def __iter__(self):
        return iter((self.delta1, self.a, self.b, self.delta0))


@dataclass(frozen=True)
class Theorem1Quantities:
    L: float
    t1: float
    t2: float
    eps: float

    def __iter__(self):
        return iter((self.L, self.t1, self.t2, self.eps))


@dataclass
class CheckReport:
    """Outcome of a Monte Carlo check.

    ``status`` is ``"pass"``, ``"fail"`` or ``"vacuous"`` (the bound does not
    apply at these settings, which is not a failure).
    """

    name: str
    status: str
    statistic: float
    threshold: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.status in ("pass", "vacuous")

    def summary(self):
        extra = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items())
        return f"{self.name}: {self.status} (statistic={_fmt(self.statistic)}, threshold={_fmt(self.threshold)}; {extra})"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def gram(X):
    """``X^T X / n``, symmetrised exactly."""
    X = check_design(getattr(X, "values", X))
    G = X.T @ X / X.shape[0]
    return 0.5 * (G + G.T)


def centered_gram(X_delta, delta):
    """``X^T X / n - delta^2 I``; unbiased for the clean Gram, possibly indefinite."""
    delta = check_nonneg(delta, "delta")
    G = gram(X_delta)
    G[np.diag_indices_from(G)] -= delta * delta
    return G


def matrix_inf_norm(A):
    """Induced l-infinity norm: the largest absolute row sum."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0.0
    return float(np.abs(A).sum(axis=1).max())


def _split(sigma, S):
    p = sigma.shape[0]
    S = np.asarray(sorted(int(j) for j in S), dtype=np.int64)
    if S.size == 0 or S.size >= p:
        raise ValueError("active set must be nonempty and proper")
    Sc = np.setdiff1d(np.arange(p), S)
    return S, Sc


def ic_norm(sigma, S):
    """``||Sigma_{S^c S} Sigma_{SS}^{-1}||_inf``, or NaN if Sigma_SS is singular."""
    sigma = np.asarray(sigma, dtype=float)
    S, Sc = _split(sigma, S)
    A = sigma[np.ix_(S, S)]
    if np.linalg.cond(A) > COND_LIMIT:
        return math.nan
    # Sigma_{S^c S} A^{-1} = (A^{-T} Sigma_{S S^c})^T
    M = np.linalg.solve(A.T, sigma[np.ix_(S, Sc)]).T
    return matrix_inf_norm(M)


def ic_margin(sigma, S):
    """Irrepresentability norm and margin ``eta = 1 - norm`` for active set ``S``."""
    sigma = np.asarray(sigma, dtype=float)
    val = ic_norm(sigma, S)
    ok = not math.isnan(val)
    return GramSummary(sigma, tuple(sorted(int(j) for j in S)), val, 1.0 - val if ok else math.nan, ok)


def lemma1_delta0(sigma, S, C1, C2, eta):
    """Perturbation radius below which the IC margin is at least halved.

    With ``C = C1 + C2``, ``A = ||Sigma_SS^{-1}||_inf`` and
    ``N = ||Sigma_{S^c S}||_inf``::

        delta1 = 1 / (2 C A)
        a      = C (A + 2 A^2 N)
        b      = 2 C^2 A^2
        delta0 = min(delta1, eta / (4 a), sqrt(eta / (4 b)))
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if C1 <= 0 or C2 <= 0:
        raise ValueError("C1 and C2 must be positive")
    sigma = np.asarray(sigma, dtype=float)
    S, Sc = _split(sigma, S)
    A_ss = sigma[np.ix_(S, S)]
    if np.linalg.cond(A_ss) > COND_LIMIT:
        raise ValueError("Sigma_SS is singular")
    inv_norm = matrix_inf_norm(np.linalg.inv(A_ss))
    cross = matrix_inf_norm(sigma[np.ix_(Sc, S)])
    C = C1 + C2
    delta1 = 1.0 / (2.0 * C * inv_norm)
    a = C * (inv_norm + 2.0 * inv_norm ** 2 * cross)
    b = 2.0 * C * C * inv_norm ** 2
    delta0 = min(delta1, eta / (4.0 * a), math.sqrt(eta / (4.0 * b)))
    return Lemma1Constants(delta1, a, b, delta0)


def _ic_norm_batch(sigma, S, Sc, D):
    # IC norm of sigma + D[t] for a stack of perturbations restricted to the S columns.
    A = sigma[np.ix_(S, S)][None] + D[:, S, :]
    Cm = sigma[np.ix_(Sc, S)][None] + D[:, Sc, :]
    M = np.linalg.solve(np.transpose(A, (0, 2, 1)), np.transpose(Cm, (0, 2, 1)))
    return np.abs(M).sum(axis=1).max(axis=1)


def _envelope_rows(rng, shape, budget):
    # Rows with absolute sum exactly ``budget`` (random Dirichlet weights, random signs).
    w = rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])
    return budget * w * rng.choice([-1.0, 1.0], size=shape)


def lemma1_falsify(sigma, S, C1, C2, eta, n_random=10_000, n_refine=100, refine_steps=100, seed=0,
                   delta=None):
    """Search for perturbations inside the envelope that break the halved IC margin.

    Perturbations are nonzero only on the ``S`` columns (the only ones that
    enter the IC norm) and every row has absolute sum ``(C1 + C2) * delta``
    with ``delta = delta0`` by default. ``n_random`` random candidates are
    drawn (half of them pure sign patterns of equal magnitude); the
    ``n_refine`` worst are improved by ``refine_steps`` rounds of
    coordinate ascent that move mass between entries of one row or flip a
    sign. Returns a :class:`CheckReport` counting violations.
    """
    sigma = np.asarray(sigma, dtype=float)
    S, Sc = _split(sigma, S)
    consts = lemma1_delta0(sigma, S, C1, C2, eta)
    delta = consts.delta0 if delta is None else float(delta)
    budget = (C1 + C2) * delta
    bound = 1.0 - eta / 2.0
    p, s = sigma.shape[0], S.size
    rng = seeding.rng(seed)

    D = np.zeros((n_random, p, s))
    half = n_random // 2
    D[:half] = _envelope_rows(rng, (half, p, s), budget)
    D[half:] = budget / s * rng.choice([-1.0, 1.0], size=(n_random - half, p, s))
    vals = np.concatenate([_ic_norm_batch(sigma, S, Sc, D[i:i + 1000]) for i in range(0, n_random, 1000)])
    worst = float(vals.max())
    violations = int((vals > bound).sum())

    for t in np.argsort(-vals)[:n_refine]:
        cur = D[t].copy()
        cur_val = vals[t]
        for _ in range(refine_steps):
            cand = np.repeat(cur[None], 2 * p, axis=0)
            rows = rng.integers(p, size=2 * p)
            for c in range(2 * p):
                r = rows[c]
                if c % 2 == 0 and s > 1:
                    i, k = rng.choice(s, size=2, replace=False)
                    move = rng.uniform(0, abs(cand[c, r, i]))
                    sign_k = np.sign(cand[c, r, k]) or 1.0
                    cand[c, r, i] -= np.sign(cand[c, r, i]) * move
                    cand[c, r, k] += sign_k * move
                else:
                    i = rng.integers(s)
                    cand[c, r, i] = -cand[c, r, i]
            cv = _ic_norm_batch(sigma, S, Sc, cand)
            best = int(np.argmax(cv))
            if cv[best] > cur_val:
                cur, cur_val = cand[best], cv[best]
        worst = max(worst, float(cur_val))
        violations += int(cur_val > bound)

    status = "pass" if violations == 0 else "fail"
    return CheckReport("lemma1_falsification", status, worst, bound,
                       {"violations": violations, "delta0": consts.delta0, "budget": budget,
                        "n_random": n_random, "n_refined": min(n_refine, n_random)})


def theorem1_epsilon(n, p, delta, M, alpha, C_t=4.0):
    """High-probability bound on ``||centered Gram - Gram||_inf``.

    ``L = log(4 p^2 / alpha)``, ``t1 = 2 M sqrt(2 delta^2 L / n)``,
    ``t2 = C_t delta^2 (sqrt(L / n) + L / n)`` and ``eps = p (t1 + t2)``.
    ``C_t`` is a free absolute constant.
    """
    if n <= 0 or p <= 0 or M <= 0:
        raise ValueError("n, p and M must be positive")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    delta = check_nonneg(delta, "delta")
    L = math.log(4.0 * p * p / alpha)
    t1 = 2.0 * M * math.sqrt(2.0 * delta * delta * L / n)
    t2 = C_t * delta * delta * (math.sqrt(L / n) + L / n)
    return Theorem1Quantities(L, t1, t2, p * (t1 + t2))


def _column_rms(X):
    return float(np.sqrt((X ** 2).mean(axis=0)).max())


def theorem1_gate(X, S, alpha, C_t=4.0, eta=None):
    """Largest delta for which ``eps(delta)`` stays within the lemma's budget.

    The budget on ``||Delta||_inf`` is ``eps0 = (C1 + C2) * delta0``, which
    does not depend on how the constant is split, so it is computed with
    ``C1 + C2 = 1``. Returns ``(delta_max, eps0, eta)``.
    """
    X = check_design(getattr(X, "values", X))
    n, p = X.shape
    G = gram(X)
    if eta is None:
        eta = ic_margin(G, S).eta
    if not eta > 0:
        return 0.0, 0.0, eta
    eps0 = lemma1_delta0(G, S, 0.5, 0.5, eta).delta0
    M = _column_rms(X)
    lo, hi = 0.0, 1.0
    while theorem1_epsilon(n, p, hi, M, alpha, C_t).eps <= eps0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if theorem1_epsilon(n, p, mid, M, alpha, C_t).eps <= eps0:
            lo = mid
        else:
            hi = mid
    return lo, eps0, eta


def verify_theorem1_mc(X, S, delta, alpha=0.05, reps=500, C_t=4.0, seed=0):
    """Monte Carlo coverage of the halved IC margin for the centered Gram.

    Draws ``reps`` noise matrices ``W`` with ``N(0, delta^2)`` entries and
    counts how often the IC norm of the centered Gram of ``X + W`` is at most
    ``1 - eta/2``, where ``eta`` is the margin of the clean Gram. Passes when
    the coverage is at least ``1 - alpha - 3 sqrt(alpha (1 - alpha) / reps)``,
    i.e. not significantly below ``1 - alpha``.
    If ``eps(delta)`` exceeds the lemma's budget the report is ``"vacuous"``.
    """
    X = check_design(getattr(X, "values", X))
    n, p = X.shape
    delta = check_nonneg(delta, "delta")
    G = gram(X)
    summ = ic_margin(G, S)
    eta = summ.eta
    if not (summ.invertible_SS and eta > 0):
        return CheckReport("theorem1_coverage", "vacuous", math.nan, math.nan,
                           {"reason": "IC does not hold for the clean Gram", "eta": eta})
    bound = 1.0 - eta / 2.0
    M = _column_rms(X)
    q = theorem1_epsilon(n, p, delta, M, alpha, C_t)
    eps0 = lemma1_delta0(G, S, 0.5, 0.5, eta).delta0
    need = 1.0 - alpha - 3.0 * math.sqrt(alpha * (1.0 - alpha) / reps)
    details = {"delta": delta, "eta": eta, "eps": q.eps, "eps0": eps0, "C_t": C_t, "M": M, "reps": reps}
    if q.eps > eps0:
        details["reason"] = "eps exceeds the lemma budget; bound is vacuous at this delta"
        return CheckReport("theorem1_coverage", "vacuous", math.nan, need, details)
    if delta == 0:
        cover = 1.0 if summ.ic_norm <= bound else 0.0
    else:
        hits = 0
        for r in range(reps):
            W = seeding.rng(seed, r).standard_normal(X.shape) * delta
            val = ic_norm(centered_gram(X + W, delta), S)
            hits += (not math.isnan(val)) and val <= bound
        cover = hits / reps
    return CheckReport("theorem1_coverage", "pass" if cover >= need else "fail", cover, need, details)


def remark2_variance_check(beta, sigma_eps, delta, n=1000, reps=100, seed=0, rel_tol=0.03):
    """Compare the simulated variance of ``eps - W beta`` with
    ``sigma^2 + delta^2 ||beta||^2``.

    Simulates ``n * reps`` rows. Only columns of ``W`` where ``beta`` is
    nonzero influence ``W beta``, so only those are drawn.
    """
    beta = np.asarray(beta, dtype=float)
    sigma_eps = check_nonneg(sigma_eps, "sigma_eps")
    delta = check_nonneg(delta, "delta")
    rows = int(n) * int(reps)
    if rows < 10_000:
        raise ValueError(f"need at least 10^4 simulated rows, got {rows}")
    nz = beta[beta != 0]
    g = seeding.rng(seed)
    eps = sigma_eps * g.standard_normal(rows)
    if nz.size and delta > 0:
        eps = eps - (delta * g.standard_normal((rows, nz.size))) @ nz
    target = sigma_eps ** 2 + delta ** 2 * float(beta @ beta)
    var = float(eps.var(ddof=1))
    if target == 0:
        ok = var == 0
        rel = 0.0 if ok else math.inf
    else:
        rel = abs(var - target) / target
        ok = rel <= rel_tol
    return CheckReport("remark2_variance", "pass" if ok else "fail", var, target,
                       {"rel_error": rel, "rel_tol": rel_tol, "rows": rows, "sigma": sigma_eps, "delta": delta})


def _binom_sf(k, n, q):
    # P(X >= k) for X ~ Binomial(n, q)
    return float(sum(math.comb(n, i) * q ** i * (1 - q) ** (n - i) for i in range(k, n + 1)))


def verify_theorem2_mc(true_freqs, B, alpha=0.05, reps=200, seed=0, test_level=0.01):
    """Coverage of the uniform Hoeffding deviation for Bernoulli frequencies.

    ``true_freqs`` is an (m, p) array of selection probabilities. Each
    repetition draws ``Binomial(B, f) / B`` for every cell and records
    whether the largest deviation exceeds ``eps(m, p, B, alpha)``. The check
    fails only if the exceedance count is significantly above ``alpha``
    (one-sided binomial test at ``test_level``).
    """
    f = np.asarray(true_freqs, dtype=float)
    m, p = f.shape
    eps = theorem2_epsilon(m, p, B, alpha)
    exceed = 0
    sup_dev = np.empty(reps)
    for r in range(reps):
        fhat = seeding.rng(seed, r).binomial(B, f) / B
        sup_dev[r] = np.abs(fhat - f).max()
        exceed += sup_dev[r] > eps
    pval = _binom_sf(int(exceed), reps, alpha)
    status = "pass" if pval >= test_level else "fail"
    return CheckReport("theorem2_coverage", status, exceed / reps, alpha,
                       {"eps": eps, "exceedances": int(exceed), "reps": reps, "p_value": pval,
                        "max_sup_dev": float(sup_dev.max())})
