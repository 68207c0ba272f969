"""Compiled coordinate-descent kernel for the fixed-lambda lasso."""

import numpy as np
from numba import njit


@njit(cache=True)
def duality_gap(X, y, beta, r, lam):
    c = X.T @ r
    cmax = np.max(np.abs(c)) if c.size else 0.0
    scale = 1.0
    if cmax > lam:
        scale = lam / cmax
    primal = 0.5 * (r @ r) + lam * np.sum(np.abs(beta))
    diff = y - scale * r
    dual = 0.5 * (y @ y) - 0.5 * (diff @ diff)
    return primal - dual


@njit(cache=True)
def _sweep(X, beta, r, col_sq, lam, idx):
    n = X.shape[0]
    max_delta = 0.0
    for t in range(idx.shape[0]):
        j = idx[t]
        if col_sq[j] == 0.0:
            continue
        old = beta[j]
        rho = 0.0
        for i in range(n):
            rho += X[i, j] * r[i]
        z = rho + col_sq[j] * old
        if z > lam:
            new = (z - lam) / col_sq[j]
        elif z < -lam:
            new = (z + lam) / col_sq[j]
        else:
            new = 0.0
        d = new - old
        if d != 0.0:
            for i in range(n):
                r[i] -= d * X[i, j]
            beta[j] = new
            ad = abs(d) * np.sqrt(col_sq[j])
            if ad > max_delta:
                max_delta = ad
    return max_delta


@njit(cache=True)
def cd_lasso(X, y, lam, beta, tol, max_sweeps):
    """Cyclic coordinate descent with active-set cycling and a duality-gap stop.

    ``beta`` is updated in place. Returns ``(gap, sweeps)``; ``gap > tol``
    means the sweep budget ran out.
    """
    p = X.shape[1]
    col_sq = np.empty(p)
    for j in range(p):
        acc = 0.0
        for i in range(X.shape[0]):
            acc += X[i, j] * X[i, j]
        col_sq[j] = acc
    r = y - X @ beta
    all_idx = np.arange(p)
    sweeps = 0
    gap = np.inf
    while sweeps < max_sweeps:
        _sweep(X, beta, r, col_sq, lam, all_idx)
        sweeps += 1
        active = np.flatnonzero(beta)
        # inner cycling restricted to the current support
        inner = 0
        while active.size and sweeps < max_sweeps and inner < 1000:
            delta = _sweep(X, beta, r, col_sq, lam, active)
            sweeps += 1
            inner += 1
            if delta * delta < 1e-3 * tol:
                break
        r = y - X @ beta
        gap = duality_gap(X, y, beta, r, lam)
        if gap <= tol:
            break
    return gap, sweeps


@njit(cache=True)
def _gram_node_cd(G, j, gamma, g, lam, tol, max_sweeps):
    # lasso of column j on the others in covariance form; g = G[:, j] - G @ gamma
    p = G.shape[0]
    for _ in range(max_sweeps):
        max_delta = 0.0
        for k in range(p):
            if k == j or G[k, k] == 0.0:
                continue
            old = gamma[k]
            z = g[k] + G[k, k] * old
            if z > lam:
                new = (z - lam) / G[k, k]
            elif z < -lam:
                new = (z + lam) / G[k, k]
            else:
                new = 0.0
            d = new - old
            if d != 0.0:
                gamma[k] = new
                for i in range(p):
                    g[i] -= d * G[i, k]
                ad = abs(d) * np.sqrt(G[k, k])
                if ad > max_delta:
                    max_delta = ad
        if max_delta < tol:
            break


@njit(cache=True)
def nodewise_cv_errors(X, folds, n_folds, levels, tol, max_sweeps):
    """Summed held-out squared error of all nodewise regressions per level.

    ``levels`` must be decreasing; fits are warm-started along them. The
    unnormalized penalty for node ``j`` in a fold is ``level * ||X_tr[:, j]||^2``.
    """
    n, p = X.shape
    n_lev = levels.shape[0]
    err = np.zeros(n_lev)
    for f in range(n_folds):
        n_tr = 0
        for i in range(n):
            if folds[i] != f:
                n_tr += 1
        Xtr = np.empty((n_tr, p))
        Xte = np.empty((n - n_tr, p))
        a = 0
        b = 0
        for i in range(n):
            if folds[i] != f:
                Xtr[a] = X[i]
                a += 1
            else:
                Xte[b] = X[i]
                b += 1
        G = Xtr.T @ Xtr
        Q = Xte.T @ Xte
        for j in range(p):
            gamma = np.zeros(p)
            g = G[:, j].copy()
            for li in range(n_lev):
                lam = levels[li] * G[j, j]
                _gram_node_cd(G, j, gamma, g, lam, tol * np.sqrt(G[j, j]), max_sweeps)
                # ||Xte_j - Xte gamma||^2 = Q_jj - 2 Q_j.gamma + gamma' Q gamma
                qg = 0.0
                quad = 0.0
                for k in range(p):
                    if gamma[k] != 0.0:
                        qg += Q[j, k] * gamma[k]
                        s = 0.0
                        for l in range(p):
                            if gamma[l] != 0.0:
                                s += Q[k, l] * gamma[l]
                        quad += gamma[k] * s
                err[li] += Q[j, j] - 2.0 * qg + quad
    return err
