"""Measurement models: per-index negative log-likelihoods and their prox maps.

Every model exposes ``nll(n, x_n)`` and ``prox(n, x_tilde_n, rho)``, the exact
minimiser of ``L_n(y_n | x_n) + rho/2 ||x_n - x_tilde_n||^2``. ``prox_all``
evaluates all time indices at once; columns are independent, so the result
does not depend on evaluation order or on the number of worker threads.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._backend import kernels
from .core import ConfigError, NumericDomainError, ShapeError, SolverError


def _chunks(N: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, N))
    edges = np.linspace(0, N, parts + 1).astype(int)
    return [(int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def _fan_out(fn, N: int, threads: int) -> None:
    """Call ``fn(lo, hi)`` over contiguous index ranges, possibly in threads."""
    spans = _chunks(N, threads)
    if len(spans) == 1:
        fn(*spans[0])
        return
    with ThreadPoolExecutor(max_workers=len(spans)) as pool:
        for fut in [pool.submit(fn, lo, hi) for lo, hi in spans]:
            fut.result()


def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not (np.isfinite(rho) and rho > 0):
        raise ConfigError(f"rho must be > 0, got {rho}")
    return rho


class MeasurementModel(ABC):
    """Negative log-likelihood separable over time indices."""

    K: int
    N: int

    @abstractmethod
    def nll(self, n: int, x_n) -> float:
        """``L_n(y_n | x_n)`` up to an additive constant independent of ``x_n``."""

    def nll_total(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(self.K, self.N)
        total = 0.0
        for n in range(self.N):
            value = self.nll(n, x[:, n])
            if not np.isfinite(value):
                raise NumericDomainError(f"non-finite likelihood at index {n}", index=n)
            total += value
        return total

    @abstractmethod
    def prox(self, n: int, x_tilde_n, rho: float) -> np.ndarray:
        """Minimiser of ``L_n + rho/2 ||x_n - x_tilde_n||^2``."""

    def prox_all(self, x_tilde, rho: float, threads: int = 1) -> np.ndarray:
        x_tilde = np.asarray(x_tilde, dtype=float).reshape(self.K, self.N)
        out = np.empty_like(x_tilde)

        def work(lo, hi):
            for n in range(lo, hi):
                out[:, n] = self.prox(n, x_tilde[:, n], rho)

        _fan_out(work, self.N, threads)
        return out

    def nll_batch(self, X) -> np.ndarray:
        """``nll_total`` for a stack of candidates ``(C, K, N)``."""
        return np.array([self.nll_total(x) for x in np.asarray(X, dtype=float)])

    def prepare(self, rho: float) -> None:
        """Build any per-``rho`` caches ahead of the iterations."""


class LinearGaussianMeasurement(MeasurementModel):
    """``L_n = ||y_n - F_n x_n||^2`` with per-index regressors.

    Parameters
    ----------
    F : array_like, shape (P, K) or (U, P, K)
        One regressor shared by all indices, or a stack of regressors.
    y : array_like, shape (P, N)
        Observations, one column per index.
    rho : float, optional
        Penalty for which to build the solver cache at construction.
    index : array_like of int, shape (N,), optional
        ``F_n = F[index[n]]``. Defaults to ``arange(N)`` for a stack, which
        then needs ``U == N``. Periodic designs pass only their distinct
        matrices here, which saves memory and lets the solves run as GEMMs.

    Notes
    -----
    For each ``rho`` the inverse of ``F_u^T F_u + rho/2 I`` is formed once per
    distinct matrix. When ``P < K`` the ``P x P`` Woodbury form is cached
    instead.
    """

    def __init__(self, F, y, rho: float | None = None, index=None):
        F = np.array(F, dtype=float)
        y = np.array(y, dtype=float)
        if y.ndim == 1:
            y = y[np.newaxis, :]
        if y.ndim != 2:
            raise ShapeError(f"y must be (P, N), got shape {y.shape}")
        P, N = y.shape
        if F.ndim == 2:
            F = F[np.newaxis]
            if index is None:
                index = np.zeros(N, dtype=np.intp)
        elif F.ndim != 3:
            raise ShapeError(f"F must be (P, K) or (U, P, K), got shape {F.shape}")
        if index is None:
            if F.shape[0] != N:
                raise ShapeError(f"F has {F.shape[0]} matrices but y has N={N} columns")
            index = np.arange(N, dtype=np.intp)
        index = np.asarray(index)
        if index.shape != (N,) or not np.issubdtype(index.dtype, np.integer):
            raise ShapeError(f"index must be {N} integers, got shape {index.shape}")
        if N and (index.min() < 0 or index.max() >= F.shape[0]):
            raise ShapeError(f"index entries must lie in [0, {F.shape[0]})")
        if F.shape[1] != P:
            raise ShapeError(f"F has P={F.shape[1]} rows but y has P={P}")
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(y))):
            raise NumericDomainError("F or y contains non-finite entries")
        self.F = F
        self.y = y
        self.index = index.astype(np.intp)
        self.P, self.N, self.K = P, N, F.shape[2]
        # one matrix per index: batched matvecs; otherwise group indices per matrix
        self._per_index = F.shape[0] == N and bool(np.all(self.index == np.arange(N)))
        # F_n^T y_n, shape (N, K)
        self._Fty = np.empty((N, self.K))
        if self._per_index:
            self._Fty[:] = np.einsum("npk,pn->nk", F, y)
        else:
            for u, rows in self._groups(0, N):
                self._Fty[rows] = (F[u].T @ y[:, rows]).T
        self._cache: dict[float, tuple[str, np.ndarray]] = {}
        self._lock = threading.Lock()
        if rho is not None:
            self.prepare(rho)

    @classmethod
    def identity(cls, y, rho: float | None = None) -> "LinearGaussianMeasurement":
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y[np.newaxis, :]
        return cls(np.eye(y.shape[0]), y, rho=rho)

    def _F(self, n: int) -> np.ndarray:
        return self.F[self.index[n]]

    def _groups(self, lo: int, hi: int):
        """``(u, rows)`` pairs covering ``lo:hi``; ``rows`` are offsets from ``lo``."""
        idx = self.index[lo:hi]
        if self.F.shape[0] == 1:
            yield 0, slice(0, hi - lo)
            return
        order = np.argsort(idx, kind="stable")
        cuts = np.flatnonzero(np.diff(idx[order])) + 1
        for rows in np.split(order, cuts):
            if rows.size:
                yield int(idx[rows[0]]), rows

    def _build(self, rho: float) -> tuple[str, np.ndarray]:
        c = rho / 2.0
        if self.P < self.K:
            # (F^T F + cI)^-1 = (I - F^T (cI + F F^T)^-1 F) / c
            S = np.einsum("upk,uqk->upq", self.F, self.F)
            S[:, np.arange(self.P), np.arange(self.P)] += c
            eye = np.eye(self.P)
            inv = np.stack([linalg.cho_solve(linalg.cho_factor(s), eye) for s in S])
            return "woodbury", inv
        A = np.einsum("upk,upj->ukj", self.F, self.F)
        A[:, np.arange(self.K), np.arange(self.K)] += c
        eye = np.eye(self.K)
        inv = np.stack([linalg.cho_solve(linalg.cho_factor(a), eye) for a in A])
        return "direct", inv

    def prepare(self, rho: float) -> None:
        rho = _check_rho(rho)
        with self._lock:
            if rho not in self._cache:
                self._cache[rho] = self._build(rho)

    def _solver(self, rho: float):
        rho = _check_rho(rho)
        entry = self._cache.get(rho)
        if entry is None:
            self.prepare(rho)
            entry = self._cache[rho]
        return entry

    def _solve(self, lo: int, hi: int, xt: np.ndarray, rho: float) -> np.ndarray:
        # xt: (hi - lo, K) rows of x_tilde^T; returns (hi - lo, K)
        kind, inv = self._solver(rho)
        c = rho / 2.0
        rhs = self._Fty[lo:hi] + c * xt
        if self._per_index:
            inv_n = inv[lo:hi]
            if kind == "direct":
                return np.matmul(inv_n, rhs[:, :, np.newaxis])[:, :, 0]
            F = self.F[lo:hi]
            Fr = np.matmul(F, rhs[:, :, np.newaxis])
            back = np.matmul(np.swapaxes(F, 1, 2), np.matmul(inv_n, Fr))[:, :, 0]
            return (rhs - back) / c
        out = np.empty_like(rhs)
        for u, rows in self._groups(lo, hi):
            r = rhs[rows]
            if kind == "direct":
                out[rows] = r @ inv[u].T
            else:
                F = self.F[u]
                out[rows] = (r - ((r @ F.T) @ inv[u].T) @ F) / c
        return out

    def prox(self, n: int, x_tilde_n, rho: float) -> np.ndarray:
        xt = np.asarray(x_tilde_n, dtype=float).reshape(1, self.K)
        return self._solve(n, n + 1, xt, rho)[0]

    def prox_all(self, x_tilde, rho: float, threads: int = 1) -> np.ndarray:
        x_tilde = np.asarray(x_tilde, dtype=float).reshape(self.K, self.N)
        self._solver(rho)
        xt = x_tilde.T
        out = np.empty((self.N, self.K))

        def work(lo, hi):
            out[lo:hi] = self._solve(lo, hi, xt[lo:hi], rho)

        _fan_out(work, self.N, threads)
        return out.T.copy()

    def _predict(self, X) -> np.ndarray:
        # X: (C, K, N) -> F_n x_n for every candidate, shape (C, P, N)
        if self._per_index:
            return np.einsum("npk,ckn->cpn", self.F, X)
        fx = np.empty((X.shape[0], self.P, self.N))
        for u, rows in self._groups(0, self.N):
            fx[:, :, rows] = np.einsum("pk,ckn->cpn", self.F[u], X[:, :, rows])
        return fx

    def nll_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.K, self.N)
        resid = self.y - self._predict(X)
        return np.sum(resid * resid, axis=(1, 2))

    def nll(self, n: int, x_n) -> float:
        x_n = np.asarray(x_n, dtype=float).reshape(self.K)
        resid = self.y[:, n] - self._F(n) @ x_n
        return float(resid @ resid)

    def nll_total(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(self.K, self.N)
        resid = self.y - self._predict(x[np.newaxis])[0]
        value = float(np.sum(resid * resid))
        if not np.isfinite(value):
            bad = int(np.argmax(~np.isfinite(np.sum(resid * resid, axis=0))))
            raise NumericDomainError(f"non-finite likelihood at index {bad}", index=bad)
        return value


@dataclass(frozen=True)
class LearningObservations:
    """Per-trial binary outcome, log reaction time and spike train.

    Any of ``b``, ``r``, ``spikes`` may be ``None`` to drop that modality.
    ``spikes`` has shape ``(N, J)``; history bins before the trial start are
    read as zero.
    """

    b: np.ndarray | None = None
    r: np.ndarray | None = None
    spikes: np.ndarray | None = None
    nu: float = 0.0
    eta: float = 0.0
    psi: float = 0.0
    omega: float = 0.0
    sigma_r: float = 1.0
    xi: float = 0.0
    a: float = 0.0
    c: tuple = field(default_factory=tuple)
    dt: float = 0.001

    def __post_init__(self):
        lengths = set()
        for name in ("b", "r"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float).ravel()
                object.__setattr__(self, name, v)
                lengths.add(v.size)
        if self.spikes is not None:
            s = np.asarray(self.spikes, dtype=float)
            if s.ndim == 1:
                s = s[:, np.newaxis]
            object.__setattr__(self, "spikes", s)
            lengths.add(s.shape[0])
        if not lengths:
            raise ConfigError("at least one of b, r, spikes is required")
        if len(lengths) != 1:
            raise ShapeError(f"modalities disagree on the number of trials: {sorted(lengths)}")
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        errors = self.validate()
        if errors:
            raise ConfigError("; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if self.omega > 0:
            errors.append(f"omega must be <= 0, got {self.omega}")
        if not self.sigma_r > 0:
            errors.append(f"sigma_r must be > 0, got {self.sigma_r}")
        if not self.dt > 0:
            errors.append(f"dt must be > 0, got {self.dt}")
        if self.b is not None and not np.all(np.isin(self.b, (0.0, 1.0))):
            errors.append("b must contain only 0/1")
        if self.spikes is not None and not np.all(np.isin(self.spikes, (0.0, 1.0))):
            errors.append("spikes must contain only 0/1")
        return errors

    @property
    def N(self) -> int:
        for v in (self.b, self.r):
            if v is not None:
                return v.size
        return self.spikes.shape[0]

    def history(self) -> np.ndarray:
        """Spike-history drive ``sum_m c_m s_{n, j-m}``, shape ``(N, J)``."""
        s = self.spikes
        h = np.zeros_like(s)
        for m, cm in enumerate(self.c, start=1):
            if m < s.shape[1]:
                h[:, m:] += cm * s[:, :-m]
        return h


class LearningMeasurement(MeasurementModel):
    """Bernoulli + log-normal + point-process likelihood for a scalar state.

    Dropped constants follow the simplified forms::

        L_B = log(1 + e^(nu + eta x)) - b eta x
        L_R = (r - psi - omega x)^2 / (2 sigma_r^2)
        L_S = dt e^(xi + a x) sum_j e^(hist_j) - a x sum_j s_j
    """

    K = 1
    tol = 1e-9
    max_newton = 100

    def __init__(self, obs: LearningObservations):
        self.obs = obs
        self.N = obs.N
        N = self.N
        self._use_b = obs.b is not None
        self._use_r = obs.r is not None
        self._use_s = obs.spikes is not None and obs.spikes.shape[1] > 0
        self._b = obs.b if self._use_b else np.zeros(N)
        self._r = obs.r if self._use_r else np.zeros(N)
        if self._use_s:
            self._H = np.exp(obs.history()).sum(axis=1)
            self._S = obs.spikes.sum(axis=1)
        else:
            self._H = np.zeros(N)
            self._S = np.zeros(N)
        self._inv_var_r = 1.0 / obs.sigma_r**2

    def _terms(self, x: np.ndarray, idx) -> np.ndarray:
        o = self.obs
        out = np.zeros_like(x)
        if self._use_b:
            u = o.nu + o.eta * x
            out += np.logaddexp(0.0, u) - self._b[idx] * o.eta * x
        if self._use_r:
            out += 0.5 * (self._r[idx] - o.psi - o.omega * x) ** 2 * self._inv_var_r
        if self._use_s:
            with np.errstate(over="ignore"):
                out += o.dt * np.exp(o.xi + o.a * x) * self._H[idx] - o.a * x * self._S[idx]
        return out

    def nll(self, n: int, x_n) -> float:
        x = np.asarray(x_n, dtype=float).reshape(1)
        return float(self._terms(x, [n])[0])

    def nll_total(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(self.N)
        vals = self._terms(x, slice(None))
        bad = ~np.isfinite(vals)
        if np.any(bad):
            n = int(np.argmax(bad))
            raise NumericDomainError(f"non-finite likelihood at index {n}", index=n)
        return float(vals.sum())

    def nll_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.N)
        return self._terms(X, slice(None)).sum(axis=1)

    def grad(self, x) -> np.ndarray:
        """Elementwise derivative of ``L_n`` at ``x_n``, shape ``(N,)``."""
        o = self.obs
        x = np.asarray(x, dtype=float).reshape(self.N)
        g = np.zeros_like(x)
        if self._use_b:
            g += o.eta * (1.0 / (1.0 + np.exp(-(o.nu + o.eta * x))) - self._b)
        if self._use_r:
            g -= o.omega * (self._r - o.psi - o.omega * x) * self._inv_var_r
        if self._use_s:
            g += o.a * (o.dt * np.exp(o.xi + o.a * x) * self._H - self._S)
        return g

    def _run_kernel(self, lo: int, hi: int, xt: np.ndarray, rho: float, out: np.ndarray):
        o = self.obs
        sl = slice(lo, hi)
        failed = kernels.learning_prox(
            np.ascontiguousarray(xt[sl]), rho,
            np.ascontiguousarray(self._b[sl]), o.nu, o.eta,
            np.ascontiguousarray(self._r[sl]), o.psi, o.omega, self._inv_var_r,
            np.ascontiguousarray(self._H[sl]), np.ascontiguousarray(self._S[sl]),
            o.xi, o.a, o.dt,
            self._use_b, self._use_r, self._use_s,
            self.tol, self.max_newton, out[sl],
        )
        if failed >= 0:
            n = lo + failed
            raise SolverError(
                f"learning prox failed at index {n}: x_tilde={xt[n]!r}, rho={rho}"
            )

    def prox(self, n: int, x_tilde_n, rho: float) -> np.ndarray:
        rho = _check_rho(rho)
        xt = np.zeros(self.N)
        xt[n] = float(np.asarray(x_tilde_n, dtype=float).reshape(-1)[0])
        out = np.zeros(self.N)
        self._run_kernel(n, n + 1, xt, rho, out)
        return out[n : n + 1]

    def prox_all(self, x_tilde, rho: float, threads: int = 1) -> np.ndarray:
        rho = _check_rho(rho)
        xt = np.ascontiguousarray(np.asarray(x_tilde, dtype=float).reshape(self.N))
        out = np.empty(self.N)
        _fan_out(lambda lo, hi: self._run_kernel(lo, hi, xt, rho, out), self.N, threads)
        return out[np.newaxis, :]
