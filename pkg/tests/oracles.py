"""Reference implementations used only by the tests.

They are written from the textbook definitions, share no code with the
package and favour clarity over speed.
"""

import numpy as np


def lasso_objective(X, y, beta, lam):
    n = X.shape[0]
    r = y - X @ beta
    return r @ r / (2 * n) + lam * np.abs(beta).sum()


def lasso_duality_gap(X, y, beta, lam):
    """Primal minus dual value at the scaled-residual dual point."""
    n = X.shape[0]
    r = y - X @ beta
    corr = np.abs(X.T @ r).max() / n
    theta = r / n * min(1.0, lam / corr) if corr > 0 else r / n
    dual = y @ y / (2 * n) - n / 2 * np.sum((theta - y / n) ** 2)
    return lasso_objective(X, y, beta, lam) - dual


def fista_lasso(X, y, lam, gap_tol=1e-10, step_tol=1e-13, max_iter=500_000):
    """Accelerated proximal gradient with gradient-based momentum restarts.

    Stops once the duality gap is below ``gap_tol`` and the iterate has
    stopped moving (``step_tol``), since a small gap alone does not pin
    down the coefficients to 1e-6. Returns ``(beta, gap)``.
    """
    n, p = X.shape
    G = X.T @ X / n
    c = X.T @ y / n
    step = 1.0 / np.linalg.eigvalsh(G).max()
    beta = np.zeros(p)
    z = beta.copy()
    t = 1.0
    for it in range(max_iter):
        u = z - step * (G @ z - c)
        new = np.sign(u) * np.maximum(np.abs(u) - step * lam, 0.0)
        if (z - new) @ (new - beta) > 0:
            t = 1.0
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        move = np.abs(new - beta).max()
        z = new + (t - 1) / t_new * (new - beta)
        beta, t = new, t_new
        if move <= step_tol and lasso_duality_gap(X, y, beta, lam) <= gap_tol:
            break
    return beta, lasso_duality_gap(X, y, beta, lam)


def kkt_residual(X, y, beta, lam, l2=0.0):
    """Largest violation of the stationarity conditions."""
    n = X.shape[0]
    g = X.T @ (y - X @ beta) / n - l2 * beta
    active = beta != 0
    res = np.zeros_like(beta)
    res[active] = np.abs(g[active] - lam * np.sign(beta[active]))
    res[~active] = np.maximum(np.abs(g[~active]) - lam, 0.0)
    return res.max() if res.size else 0.0


def nogueira_naive(Z):
    """Stability index computed with explicit loops from its definition."""
    Z = [list(map(int, row)) for row in Z]
    M, d = len(Z), len(Z[0])
    kbar = sum(sum(row) for row in Z) / M
    total = 0.0
    for f in range(d):
        pf = sum(Z[i][f] for i in range(M)) / M
        total += M / (M - 1) * pf * (1 - pf)
    return 1 - (total / d) / ((kbar / d) * (1 - kbar / d))


def largest_gap_naive(freqs):
    """Brute force over every candidate threshold between sorted values."""
    vals = sorted(freqs, reverse=True)
    best, best_k = -1.0, None
    for k in range(len(vals) - 1):
        gap = vals[k] - vals[k + 1]
        if gap > best:
            best, best_k = gap, k
    if best <= 0:
        return set(), None
    tau = (vals[best_k] + vals[best_k + 1]) / 2
    return {j for j, f in enumerate(freqs) if f >= tau}, tau


def block_projection_analytic(p, s, rho_rel, rho_irr, rho_mix, floor=1e-8):
    """Projected block correlation entries from the block eigenstructure.

    The block matrix has within-block contrast eigenvalues ``1 - rho`` and a
    2 x 2 system on the two block-mean directions. Only that system can carry
    a negative eigenvalue; clipping it and rescaling to unit diagonal gives
    block-constant entries. Returns ``(rel, irr, mix, min_eig_before)``.
    """
    q = p - s
    A = np.array([[1 + (s - 1) * rho_rel, rho_mix * np.sqrt(s * q)],
                  [rho_mix * np.sqrt(s * q), 1 + (q - 1) * rho_irr]])
    w, V = np.linalg.eigh(A)
    lam_min = min(w[0], 1 - rho_rel, 1 - rho_irr)
    if w[0] >= floor:
        return rho_rel, rho_irr, rho_mix, lam_min
    a, b = V[:, 0]
    bump = floor - w[0]
    d_s = 1 + bump * a * a / s
    d_q = 1 + bump * b * b / q
    rel = (rho_rel + bump * a * a / s) / d_s
    irr = (rho_irr + bump * b * b / q) / d_q
    mix = (rho_mix + bump * a * b / np.sqrt(s * q)) / np.sqrt(d_s * d_q)
    return rel, irr, mix, lam_min
