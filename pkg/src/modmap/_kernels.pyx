# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. ``_pykernels`` mirrors every function here."""

from libc.math cimport copysign, exp, fabs, isfinite, sqrt

import numpy as np


def tridiag_solve(const double[:, ::1] l, const double[:, ::1] m,
                  const double[:, ::1] rhs, double[:, ::1] out):
    """Solve ``K`` independent SPD tridiagonal systems from their Cholesky factors.

    Row ``k`` has factor diagonal ``l[k]`` and subdiagonal ``m[k, 1:]``.
    """
    cdef Py_ssize_t K = rhs.shape[0], N = rhs.shape[1]
    cdef Py_ssize_t k, n
    cdef double prev
    with nogil:
        for k in range(K):
            prev = rhs[k, 0] / l[k, 0]
            out[k, 0] = prev
            for n in range(1, N):
                prev = (rhs[k, n] - m[k, n] * prev) / l[k, n]
                out[k, n] = prev
            prev = out[k, N - 1] / l[k, N - 1]
            out[k, N - 1] = prev
            for n in range(N - 2, -1, -1):
                prev = (out[k, n] - m[k, n + 1] * prev) / l[k, n]
                out[k, n] = prev


def block_solve(const double[:, :, ::1] L, const double[:, :, ::1] C,
                const double[:, ::1] rhs, double[:, ::1] out):
    """Forward/backward substitution through a block-tridiagonal Cholesky factor.

    ``L[n]`` is the lower-triangular diagonal factor and ``C[n]`` the
    subdiagonal block coupling ``n`` to ``n - 1`` (``C[0]`` unused).
    """
    cdef Py_ssize_t K = rhs.shape[0], N = rhs.shape[1]
    cdef Py_ssize_t n, i, j
    cdef double acc
    cdef double[:, ::1] y = np.empty((N, K))
    cdef double[::1] v = np.empty(K)
    with nogil:
        for n in range(N):
            for i in range(K):
                acc = rhs[i, n]
                if n > 0:
                    for j in range(K):
                        acc = acc - C[n, i, j] * y[n - 1, j]
                v[i] = acc
            for i in range(K):
                acc = v[i]
                for j in range(i):
                    acc = acc - L[n, i, j] * y[n, j]
                y[n, i] = acc / L[n, i, i]
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


cdef inline double _logistic(double u) nogil:
    cdef double e
    if u >= 0:
        return 1.0 / (1.0 + exp(-u))
    e = exp(u)
    return e / (1.0 + e)


cdef struct LearnParams:
    double rho
    double nu
    double eta
    double psi
    double omega
    double inv_var_r
    double xi
    double a
    double dt
    int use_b
    int use_r
    int use_s


cdef inline double _grad(double x, double xt, double b, double r, double H,
                         double S, LearnParams* p) nogil:
    cdef double g = p.rho * (x - xt)
    if p.use_b:
        g += p.eta * (_logistic(p.nu + p.eta * x) - b)
    if p.use_r:
        g -= p.omega * (r - p.psi - p.omega * x) * p.inv_var_r
    if p.use_s:
        g += p.a * (p.dt * exp(p.xi + p.a * x) * H - S)
    return g


cdef inline double _hess(double x, double H, LearnParams* p) nogil:
    cdef double h = p.rho
    cdef double s
    if p.use_b:
        s = _logistic(p.nu + p.eta * x)
        h += p.eta * p.eta * s * (1.0 - s)
    if p.use_r:
        h += p.omega * p.omega * p.inv_var_r
    if p.use_s:
        h += p.a * p.a * p.dt * exp(p.xi + p.a * x) * H
    return h


def learning_prox(const double[::1] xt, double rho,
                  const double[::1] b, double nu, double eta,
                  const double[::1] r, double psi, double omega, double inv_var_r,
                  const double[::1] H, const double[::1] S,
                  double xi, double a, double dt,
                  bint use_b, bint use_r, bint use_s,
                  double tol, int max_newton, double[::1] out):
    """Safeguarded Newton for each scalar learning-model proximal problem.

    Returns -1 on success, otherwise the first index that failed to bracket
    or converge.
    """
    cdef LearnParams p
    p.rho = rho; p.nu = nu; p.eta = eta; p.psi = psi; p.omega = omega
    p.inv_var_r = inv_var_r; p.xi = xi; p.a = a; p.dt = dt
    p.use_b = use_b; p.use_r = use_r; p.use_s = use_s
    cdef Py_ssize_t n, N = xt.shape[0]
    cdef double x, g, h, lo, hi, step, xn, bn, rn, Hn, Sn
    cdef int it, expand
    cdef int failed = -1
    with nogil:
        for n in range(N):
            bn = b[n] if use_b else 0.0
            rn = r[n] if use_r else 0.0
            Hn = H[n] if use_s else 0.0
            Sn = S[n] if use_s else 0.0
            x = xt[n]
            g = _grad(x, xt[n], bn, rn, Hn, Sn, &p)
            if fabs(g) <= tol:
                out[n] = x
                continue
            step = 50.0
            if g > 0:
                hi = x
                lo = x - step
                expand = 0
                while _grad(lo, xt[n], bn, rn, Hn, Sn, &p) > 0 and expand < 60:
                    hi = lo
                    step *= 2.0
                    lo = x - step
                    expand += 1
            else:
                lo = x
                hi = x + step
                expand = 0
                while _grad(hi, xt[n], bn, rn, Hn, Sn, &p) < 0 and expand < 60:
                    lo = hi
                    step *= 2.0
                    hi = x + step
                    expand += 1
            if expand >= 60:
                failed = n
                break
            for it in range(max_newton + 200):
                g = _grad(x, xt[n], bn, rn, Hn, Sn, &p)
                if fabs(g) <= tol:
                    break
                if g > 0:
                    hi = x
                else:
                    lo = x
                if hi - lo <= 4e-16 * (1.0 + fabs(x)):
                    break
                xn = 0.5 * (lo + hi)
                if it < max_newton:
                    h = _hess(x, Hn, &p)
                    if isfinite(h) and h > 0:
                        xn = x - g / h
                        if not (xn > lo and xn < hi):
                            xn = 0.5 * (lo + hi)
                x = xn
            else:
                failed = n
                break
            out[n] = x
    return failed


def soft_threshold(const double[::1] v, double t, double[::1] out):
    """``out = sign(v) * max(|v| - t, 0)`` in one pass; NaN stays NaN."""
    cdef Py_ssize_t i
    cdef double a
    with nogil:
        for i in range(v.shape[0]):
            a = fabs(v[i]) - t
            if not (a > 0 or a != a):
                a = 0.0
            out[i] = copysign(a, v[i])


def group_shrink(const double[:, ::1] v, double t, double[:, ::1] out):
    """Row-wise ``v_k * (|v_k| - t) / |v_k|`` for rows with ``|v_k| > t``, else zero."""
    cdef Py_ssize_t K = v.shape[0], N = v.shape[1]
    cdef Py_ssize_t k, n
    cdef double s, norm, num
    with nogil:
        for k in range(K):
            s = 0.0
            for n in range(N):
                s += v[k, n] * v[k, n]
            norm = sqrt(s)
            # a NaN row stays NaN so the solver can report it
            if norm > t or norm != norm:
                num = norm - t
                for n in range(N):
                    out[k, n] = v[k, n] * num / norm
            else:
                for n in range(N):
                    out[k, n] = 0.0
