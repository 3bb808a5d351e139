"""Shared types, the transition operator and objective evaluation.

A latent series is a ``(K, N)`` float array with one column per time index.
The same shape holds every ADMM iterate (x, w, z and both dual variables).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ModmapError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(ModmapError, ValueError):
    """Array dimensions are inconsistent."""


class ConfigError(ModmapError, ValueError):
    """A configuration value violates its invariant."""


class NumericDomainError(ModmapError, ArithmeticError):
    """A quantity left its finite domain.

    ``index`` is the (0-based) time index at which the failure was detected,
    or ``None`` when it is not attributable to a single index.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class SolverError(ModmapError, RuntimeError):
    """An inner solver failed to terminate or bracket its root."""


def as_series(data, name: str = "series") -> np.ndarray:
    """Validate and return a latent series as a read-only ``(K, N)`` array.

    1-D input is read as a scalar state (``K = 1``).
    """
    arr = np.array(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D (K, N), got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have K >= 1 and N >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericDomainError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TransitionModel:
    """Transition matrix ``D`` defining ``w_1 = x_1, w_n = x_n - D x_{n-1}``.

    A scalar (or 1-element sequence) is stored as a ``1 x 1`` matrix.
    """

    D: np.ndarray

    def __post_init__(self):
        D = np.array(self.D, dtype=float)
        if D.ndim == 0:
            D = D.reshape(1, 1)
        if D.ndim == 1 and D.size == 1:
            D = D.reshape(1, 1)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ShapeError(f"D must be square, got shape {D.shape}")
        if not np.all(np.isfinite(D)):
            raise NumericDomainError("D contains non-finite entries")
        D.setflags(write=False)
        object.__setattr__(self, "D", D)

    @property
    def K(self) -> int:
        return self.D.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.D == np.diag(np.diag(self.D))))

    @classmethod
    def identity(cls, K: int) -> "TransitionModel":
        return cls(np.eye(K))

    def _check(self, a: np.ndarray, name: str) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.ndim == 1:
            a = a[np.newaxis, :]
        if a.ndim != 2 or a.shape[0] != self.K:
            raise ShapeError(
                f"{name} has shape {a.shape}, expected {self.K} rows to match D"
            )
        return a


def apply_transition(x, t: TransitionModel) -> np.ndarray:
    """Map a state sequence to its innovations ``w = A(x)``."""
    x = t._check(x, "x")
    w = x.copy()
    w[:, 1:] -= t.D @ x[:, :-1]
    return w


def apply_transition_adjoint(a, t: TransitionModel) -> np.ndarray:
    """Adjoint of :func:`apply_transition` under the Frobenius inner product.

    ``out_n = a_n - D^T a_{n+1}`` for ``n < N`` and ``out_N = a_N``.
    """
    a = t._check(a, "a")
    out = a.copy()
    out[:, :-1] -= t.D.T @ a[:, 1:]
    return out


def invert_transition(w, t: TransitionModel) -> np.ndarray:
    """Recover ``x`` from ``w = A(x)`` by the forward recursion."""
    w = t._check(w, "w")
    x = np.empty_like(w)
    x[:, 0] = w[:, 0]
    for n in range(1, w.shape[1]):
        x[:, n] = w[:, n] + t.D @ x[:, n - 1]
    return x


def objective(x, meas, prior, t: TransitionModel, beta: float) -> float:
    """Simplified MAP objective ``sum_n L_n(y_n | x_n) + beta * phi(A(x))``.

    Additive constants dropped by the measurement model are not restored,
    so the value is offset from the true negative log-posterior by a
    data-dependent constant.
    """
    x = t._check(x, "x")
    value = meas.nll_total(x)
    if beta != 0.0:
        value += beta * prior.phi(apply_transition(x, t))
    if not np.isfinite(value):
        raise NumericDomainError("objective is not finite")
    return float(value)


@dataclass(frozen=True)
class AdmmConfig:
    """Penalty, prior weight, stopping tolerances and iteration cap."""

    rho: float = 1.0
    beta: float = 1.0
    eps_rel: float = 1e-4
    eps_abs: float = 1e-6
    max_iter: int = 500
    seed: int = 0

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ConfigError("; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if not (np.isfinite(self.rho) and self.rho > 0):
            errors.append(f"rho must be > 0, got {self.rho}")
        if not (np.isfinite(self.beta) and self.beta >= 0):
            errors.append(f"beta must be >= 0, got {self.beta}")
        if not self.eps_rel > 0:
            errors.append(f"eps_rel must be > 0, got {self.eps_rel}")
        if not self.eps_abs > 0:
            errors.append(f"eps_abs must be > 0, got {self.eps_abs}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            errors.append(f"max_iter must be an integer >= 1, got {self.max_iter}")
        return errors
