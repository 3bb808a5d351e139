"""Pure-Python versions of the routines in ``_kernels.pyx``.

Same signatures and same arithmetic order, so either backend can stand in
for the other. Used when the extension is not built or when
``MODMAP_PURE_PYTHON=1``.
"""

import math

import numpy as np


def tridiag_solve(l, m, rhs, out):
    K, N = rhs.shape
    for k in range(K):
        lk, mk, rk = l[k], m[k], rhs[k]
        prev = rk[0] / lk[0]
        out[k, 0] = prev
        for n in range(1, N):
            prev = (rk[n] - mk[n] * prev) / lk[n]
            out[k, n] = prev
        prev = out[k, N - 1] / lk[N - 1]
        out[k, N - 1] = prev
        for n in range(N - 2, -1, -1):
            prev = (out[k, n] - mk[n + 1] * prev) / lk[n]
            out[k, n] = prev


def block_solve(L, C, rhs, out):
    K, N = rhs.shape
    y = np.empty((N, K))
    for n in range(N):
        v = rhs[:, n].copy()
        if n > 0:
            for i in range(K):
                acc = v[i]
                for j in range(K):
                    acc = acc - C[n, i, j] * y[n - 1, j]
                v[i] = acc
        for i in range(K):
            acc = v[i]
            for j in range(i):
                acc = acc - L[n, i, j] * y[n, j]
            y[n, i] = acc / L[n, i, i]
    v = np.empty(K)
    for n in range(N - 1, -1, -1):
        for i in range(K):
            acc = y[n, i]
            if n < N - 1:
                for j in range(K):
                    acc = acc - C[n + 1, j, i] * out[j, n + 1]
            v[i] = acc
        for i in range(K - 1, -1, -1):
            acc = v[i]
            for j in range(i + 1, K):
                acc = acc - L[n, j, i] * out[j, n]
            out[i, n] = acc / L[n, i, i]


def _logistic(u):
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


def _exp(u):
    try:
        return math.exp(u)
    except OverflowError:
        return math.inf


def learning_prox(xt, rho, b, nu, eta, r, psi, omega, inv_var_r, H, S,
                  xi, a, dt, use_b, use_r, use_s, tol, max_newton, out):
    def grad(x, xtn, bn, rn, Hn, Sn):
        g = rho * (x - xtn)
        if use_b:
            g += eta * (_logistic(nu + eta * x) - bn)
        if use_r:
            g -= omega * (rn - psi - omega * x) * inv_var_r
        if use_s:
            g += a * (dt * _exp(xi + a * x) * Hn - Sn)
        return g

    def hess(x, Hn):
        h = rho
        if use_b:
            s = _logistic(nu + eta * x)
            h += eta * eta * s * (1.0 - s)
        if use_r:
            h += omega * omega * inv_var_r
        if use_s:
            h += a * a * dt * _exp(xi + a * x) * Hn
        return h

    for n in range(len(xt)):
        xtn = float(xt[n])
        bn = float(b[n]) if use_b else 0.0
        rn = float(r[n]) if use_r else 0.0
        Hn = float(H[n]) if use_s else 0.0
        Sn = float(S[n]) if use_s else 0.0
        x = xtn
        g = grad(x, xtn, bn, rn, Hn, Sn)
        if abs(g) <= tol:
            out[n] = x
            continue
        step = 50.0
        expand = 0
        if g > 0:
            hi, lo = x, x - step
            while grad(lo, xtn, bn, rn, Hn, Sn) > 0 and expand < 60:
                hi = lo
                step *= 2.0
                lo = x - step
                expand += 1
        else:
            lo, hi = x, x + step
            while grad(hi, xtn, bn, rn, Hn, Sn) < 0 and expand < 60:
                lo = hi
                step *= 2.0
                hi = x + step
                expand += 1
        if expand >= 60:
            return n
        for it in range(max_newton + 200):
            g = grad(x, xtn, bn, rn, Hn, Sn)
            if abs(g) <= tol:
                break
            if g > 0:
                hi = x
            else:
                lo = x
            if hi - lo <= 4e-16 * (1.0 + abs(x)):
                break
            xn = 0.5 * (lo + hi)
            if it < max_newton:
                h = hess(x, Hn)
                if math.isfinite(h) and h > 0:
                    xn = x - g / h
                    if not (lo < xn < hi):
                        xn = 0.5 * (lo + hi)
            x = xn
        else:
            return n
        out[n] = x
    return -1


def soft_threshold(v, t, out):
    np.abs(v, out=out)
    out -= t
    np.maximum(out, 0.0, out=out)
    np.copysign(out, v, out=out)


def group_shrink(v, t, out):
    norms = np.sqrt(np.einsum("ij,ij->i", v, v))
    keep = ~(norms <= t)
    num = np.where(keep, norms - t, 0.0)
    den = np.where(keep, norms, 1.0)
    np.multiply(v, num[:, np.newaxis], out=out)
    out /= den[:, np.newaxis]
