"""Compiled likelihood kernels for the Newton fitters.

Each kernel returns ``(value, gradient, information)`` in a single pass so a
bootstrap replicate does not pay per-call array overhead many times over.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def cox_breslow(X, w, wd, block_start, block_end, beta):
    """Weighted Breslow partial likelihood for rows sorted by ascending time.

    Rows ``block_start[b]:block_end[b]`` share one observed time; blocks are
    in ascending time order. ``wd`` is weight times event indicator.
    """
    n, k = X.shape
    eta = np.empty(n)
    r = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(k):
            s += X[i, j] * beta[j]
        eta[i] = s
        r[i] = w[i] * np.exp(s)

    s0 = 0.0
    s1 = np.zeros(k)
    s2 = np.zeros((k, k))
    value = 0.0
    grad = np.zeros(k)
    info = np.zeros((k, k))
    dx = np.zeros(k)
    for b in range(block_start.size - 1, -1, -1):
        d = 0.0
        for j in range(k):
            dx[j] = 0.0
        for i in range(block_start[b], block_end[b]):
            ri = r[i]
            s0 += ri
            for j in range(k):
                xj = X[i, j]
                s1[j] += ri * xj
                for m in range(j + 1):
                    s2[j, m] += ri * xj * X[i, m]
            if wd[i] != 0.0:
                d += wd[i]
                value += wd[i] * eta[i]
                for j in range(k):
                    dx[j] += wd[i] * X[i, j]
        if d == 0.0:
            continue
        value -= d * np.log(s0)
        for j in range(k):
            mj = s1[j] / s0
            grad[j] += dx[j] - d * mj
            for m in range(j + 1):
                info[j, m] += d * (s2[j, m] / s0 - mj * s1[m] / s0)
    for j in range(k):
        for m in range(j):
            info[m, j] = info[j, m]
    return value, grad, info


@njit(cache=True)
def logistic(X, y, w, beta):
    n, k = X.shape
    value = 0.0
    grad = np.zeros(k)
    info = np.zeros((k, k))
    for i in range(n):
        eta = 0.0
        for j in range(k):
            eta += X[i, j] * beta[j]
        # log(1 + exp(eta)) without overflow
        if eta > 0:
            log1pexp = eta + np.log1p(np.exp(-eta))
            mu = 1.0 / (1.0 + np.exp(-eta))
        else:
            log1pexp = np.log1p(np.exp(eta))
            e = np.exp(eta)
            mu = e / (1.0 + e)
        value += w[i] * (y[i] * eta - log1pexp)
        resid = w[i] * (y[i] - mu)
        v = w[i] * mu * (1.0 - mu)
        for j in range(k):
            grad[j] += resid * X[i, j]
            for m in range(j + 1):
                info[j, m] += v * X[i, j] * X[i, m]
    for j in range(k):
        for m in range(j):
            info[m, j] = info[j, m]
    return value, grad, info


# Newton-Raphson status codes
CONVERGED = 0
MAX_ITER = 1
SINGULAR = 2
DIVERGED = 3
STALLED = 4


@njit(cache=True)
def _cholesky_solve(H, g):
    """Solve ``H x = g`` for symmetric positive-definite ``H``; ``ok`` is False if not PD
    or if the squared diagonal ratio of the factor falls below 1e-12."""
    k = H.shape[0]
    L = np.zeros((k, k))
    x = np.zeros(k)
    for j in range(k):
        s = H[j, j]
        for m in range(j):
            s -= L[j, m] * L[j, m]
        if not s > 0.0:
            return x, False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, k):
            s = H[i, j]
            for m in range(j):
                s -= L[i, m] * L[j, m]
            L[i, j] = s / L[j, j]
    dmin = np.inf
    dmax = 0.0
    for j in range(k):
        dmin = min(dmin, L[j, j])
        dmax = max(dmax, L[j, j])
    if (dmin / dmax) ** 2 < 1e-12:
        return x, False
    y = np.zeros(k)
    for i in range(k):
        s = g[i]
        for m in range(i):
            s -= L[i, m] * y[m]
        y[i] = s / L[i, i]
    for i in range(k - 1, -1, -1):
        s = y[i]
        for m in range(i + 1, k):
            s -= L[m, i] * x[m]
        x[i] = s / L[i, i]
    return x, True


@njit(cache=True)
def _max_abs(v, start):
    out = 0.0
    for i in range(start, v.size):
        out = max(out, abs(v[i]))
    return out


@njit(cache=True)
def _newton_loop(kind, X, y, w, wd, block_start, block_end, x0, tol, max_iter, grad_scale, bound, bound_from):
    """Shared Newton-Raphson loop with step-halving.

    ``kind`` 0 is the Cox kernel, 1 the logistic kernel. Returns
    ``(params, value, iterations, status)``. ``bound`` caps
    ``|params[bound_from:]|`` before the fit is declared divergent.
    """
    x = x0.copy()
    if kind == 0:
        value, grad, info = cox_breslow(X, w, wd, block_start, block_end, x)
    else:
        value, grad, info = logistic(X, y, w, x)
    if not np.isfinite(value):
        return x, value, 0, STALLED
    for it in range(1, max_iter + 1):
        step, ok = _cholesky_solve(info, grad)
        if not ok:
            return x, value, it, SINGULAR
        scale = 1.0
        accepted = False
        for _ in range(40):
            cand = x + scale * step
            if kind == 0:
                nv, ng, ni = cox_breslow(X, w, wd, block_start, block_end, cand)
            else:
                nv, ng, ni = logistic(X, y, w, cand)
            if np.isfinite(nv) and nv >= value - 1e-12 * abs(value):
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            # no ascent possible: accept only at the numerical optimum
            if _max_abs(grad, 0) / grad_scale < 1e3 * tol:
                return x, value, it, CONVERGED
            return x, value, it, STALLED
        x = cand
        value = nv
        grad = ng
        info = ni
        if _max_abs(x, bound_from) > bound:
            return x, value, it, DIVERGED
        if _max_abs(grad, 0) / grad_scale < tol and _max_abs(step, 0) * scale < tol:
            return x, value, it, CONVERGED
    return x, value, max_iter, MAX_ITER
