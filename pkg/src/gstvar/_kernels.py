"""Compiled inner loops for the log-likelihood hot path."""

import numpy as np
from numba import njit

LOG_2PI = np.log(2.0 * np.pi)


@njit(cache=True)
def loglik_kernel(y, p, mean_stacks, chols, log_norms, log_alphas, phi, ar, omega):
    T_total, d = y.shape
    M = phi.shape[0]
    dp = d * p
    hist = np.empty(dp)
    z = np.empty(dp)
    logw = np.empty(M)
    mean = np.empty(d)
    cov = np.empty((d, d))
    L = np.empty((d, d))
    r = np.empty(d)
    total = 0.0
    for t in range(p, T_total):
        for i in range(p):
            for k in range(d):
                hist[i * d + k] = y[t - 1 - i, k]
        if M == 1:
            logw[0] = 0.0
        else:
            top = -np.inf
            for m in range(M):
                q = 0.0
                C = chols[m]
                for i in range(dp):
                    s = hist[i] - mean_stacks[m, i]
                    for j in range(i):
                        s -= C[i, j] * z[j]
                    z[i] = s / C[i, i]
                    q += z[i] * z[i]
                logw[m] = log_alphas[m] + log_norms[m] - 0.5 * q
                if logw[m] > top:
                    top = logw[m]
            if not np.isfinite(top):
                return np.nan
            s = 0.0
            for m in range(M):
                logw[m] = np.exp(logw[m] - top)
                s += logw[m]
            for m in range(M):
                logw[m] /= s
        for k in range(d):
            mean[k] = 0.0
            for l in range(d):
                cov[k, l] = 0.0
        for m in range(M):
            w = logw[m] if M > 1 else 1.0
            for k in range(d):
                acc = phi[m, k]
                for j in range(dp):
                    acc += ar[m, k, j] * hist[j]
                mean[k] += w * acc
                for l in range(d):
                    cov[k, l] += w * omega[m, k, l]
        logdet = 0.0
        for i in range(d):
            for j in range(i + 1):
                s = cov[i, j]
                for k in range(j):
                    s -= L[i, k] * L[j, k]
                if i == j:
                    if s <= 0.0:
                        return np.nan
                    L[i, i] = np.sqrt(s)
                else:
                    L[i, j] = s / L[j, j]
            logdet += np.log(L[i, i])
        q = 0.0
        for i in range(d):
            s = y[t, i] - mean[i]
            for j in range(i):
                s -= L[i, j] * r[j]
            r[i] = s / L[i, i]
            q += r[i] * r[i]
        total += -0.5 * (d * LOG_2PI + q) - logdet
    return total


@njit(cache=True)
def _chol(a, out):
    n = a.shape[0]
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j]
            for k in range(j):
                s -= out[i, k] * out[j, k]
            if i == j:
                if not s > 0.0:
                    return False
                out[i, i] = np.sqrt(s)
            else:
                out[i, j] = s / out[j, j]
        for j in range(i + 1, n):
            out[i, j] = 0.0
    return True


@njit(cache=True)
def flat_loglik(theta, y, d, p, M, radius_cap):
    """Log-likelihood straight from the flat parameter; -inf if the point is invalid.

    ``radius_cap`` is the largest admissible companion spectral radius.
    """
    dp = d * p
    phi = np.empty((M, d))
    ar = np.empty((M, d, dp))
    omega = np.empty((M, d, d))
    log_alphas = np.empty(M)
    mean_stacks = np.empty((M, dp))
    chols = np.empty((M, dp, dp))
    log_norms = np.empty(M)
    pos = 0
    for m in range(M):
        for k in range(d):
            phi[m, k] = theta[pos]
            pos += 1
    for m in range(M):
        for i in range(p):
            for c in range(d):
                for r in range(d):
                    ar[m, r, i * d + c] = theta[pos]
                    pos += 1
    for m in range(M):
        for c in range(d):
            for r in range(c, d):
                omega[m, r, c] = theta[pos]
                omega[m, c, r] = theta[pos]
                pos += 1
    rest = 1.0
    for m in range(M - 1):
        a = theta[pos]
        pos += 1
        if not a > 0.0:
            return -np.inf
        log_alphas[m] = np.log(a)
        rest -= a
    if not rest > 0.0:
        return -np.inf
    log_alphas[M - 1] = np.log(rest)
    tmp = np.empty((d, d))
    for m in range(M):
        if not _chol(omega[m], tmp):
            return -np.inf
        comp = np.zeros((dp, dp))
        for r in range(d):
            for j in range(dp):
                comp[r, j] = ar[m, r, j]
        for r in range(d, dp):
            comp[r, r - d] = 1.0
        eig = np.linalg.eigvals(comp.astype(np.complex128))
        rho = 0.0
        for e in eig:
            if abs(e) > rho:
                rho = abs(e)
        if not rho < radius_cap:
            return -np.inf
        lhs = np.eye(d)
        for i in range(p):
            for r in range(d):
                for c in range(d):
                    lhs[r, c] -= ar[m, r, i * d + c]
        mu = np.linalg.solve(lhs, phi[m].copy())
        for i in range(p):
            for k in range(d):
                mean_stacks[m, i * d + k] = mu[k]
        q = np.zeros((dp, dp))
        for r in range(d):
            for c in range(d):
                q[r, c] = omega[m, r, c]
        n2 = dp * dp
        big = np.eye(n2) - np.kron(comp, comp)
        qv = np.empty(n2)
        for c in range(dp):
            for r in range(dp):
                qv[c * dp + r] = q[r, c]
        sv = np.linalg.solve(big, qv)
        sig = np.empty((dp, dp))
        for c in range(dp):
            for r in range(dp):
                sig[r, c] = sv[c * dp + r]
        for r in range(dp):
            for c in range(r):
                v = 0.5 * (sig[r, c] + sig[c, r])
                sig[r, c] = v
                sig[c, r] = v
        cm = np.empty((dp, dp))
        if not _chol(sig, cm):
            return -np.inf
        chols[m] = cm
        ld = 0.0
        for i in range(dp):
            ld += np.log(cm[i, i])
        log_norms[m] = -0.5 * dp * LOG_2PI - ld
    val = loglik_kernel(y, p, mean_stacks, chols, log_norms, log_alphas, phi, ar, omega)
    if not np.isfinite(val):
        return -np.inf
    return val
