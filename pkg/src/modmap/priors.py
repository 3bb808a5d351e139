"""System-model priors on the innovations ``w = A(x)``.

``prox(w_tilde, beta, rho)`` returns the exact minimiser of
``beta * phi(w) + rho/2 ||w - w_tilde||_F^2``. The three norm priors depend
on ``(beta, rho)`` only through the threshold ``t = beta / rho``.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ._backend import kernels
from .core import ConfigError, NumericDomainError, ShapeError


def soft_threshold(v, t: float) -> np.ndarray:
    """Entrywise ``sign(v) * max(|v| - t, 0)``."""
    v = np.ascontiguousarray(v, dtype=float)
    out = np.empty_like(v)
    kernels.soft_threshold(v.reshape(-1), float(t), out.reshape(-1))
    return out


def group_shrink(v, t: float) -> np.ndarray:
    """Row-wise shrinkage ``(1 - t / ||v_k||)_+ v_k``; zero rows stay zero."""
    v = np.ascontiguousarray(v, dtype=float)
    if t == 0:
        return v.copy()
    if v.ndim != 2:
        raise ShapeError(f"group shrinkage needs a (K, N) matrix, got shape {v.shape}")
    out = np.empty_like(v)
    # v * (|v| - t) / |v| rounds once less than v * (1 - t / |v|)
    kernels.group_shrink(v, float(t), out)
    return out


def singular_value_threshold(v, t: float) -> np.ndarray:
    """Soft-threshold the singular values of ``v`` at ``t``."""
    v = np.asarray(v, dtype=float)
    try:
        U, s, Vt = np.linalg.svd(v, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericDomainError(f"SVD failed: {exc}") from exc
    s = np.maximum(s - t, 0.0)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ Vt[keep]


def _threshold(beta: float, rho: float) -> float:
    if not beta >= 0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    if not rho > 0:
        raise ConfigError(f"rho must be > 0, got {rho}")
    return beta / rho


class SystemPrior(ABC):
    """Convex penalty ``phi`` on the full ``(K, N)`` innovation matrix."""

    name: str

    @abstractmethod
    def phi(self, w) -> float:
        ...

    @abstractmethod
    def prox(self, w_tilde, beta: float, rho: float) -> np.ndarray:
        ...

    def subgradient(self, w) -> np.ndarray:
        """One element of the subdifferential of ``phi`` at ``w``."""
        raise NotImplementedError


class GaussianPrior(SystemPrior):
    """iid ``N(gamma, sigma_v^2)`` innovations, ``phi = sum (w - gamma)^2 / (2 sigma_v^2)``."""

    name = "gaussian"

    def __init__(self, gamma: float = 0.0, sigma_v: float = 1.0):
        if not sigma_v > 0:
            raise ConfigError(f"sigma_v must be > 0, got {sigma_v}")
        self.gamma = float(gamma)
        self.sigma_v = float(sigma_v)

    def phi(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(np.sum((w - self.gamma) ** 2) / (2.0 * self.sigma_v**2))

    def prox(self, w_tilde, beta: float = 1.0, rho: float = 1.0) -> np.ndarray:
        _threshold(beta, rho)
        prec = beta / self.sigma_v**2
        w_tilde = np.asarray(w_tilde, dtype=float)
        return (prec * self.gamma + rho * w_tilde) / (prec + rho)

    def subgradient(self, w) -> np.ndarray:
        return (np.asarray(w, dtype=float) - self.gamma) / self.sigma_v**2


class L1Prior(SystemPrior):
    """``phi = ||w||_1``, favouring sparse innovations."""

    name = "l1"

    def phi(self, w) -> float:
        return float(np.sum(np.abs(w)))

    def prox(self, w_tilde, beta: float, rho: float) -> np.ndarray:
        return soft_threshold(w_tilde, _threshold(beta, rho))

    def subgradient(self, w) -> np.ndarray:
        return np.sign(np.asarray(w, dtype=float))


class GroupPrior(SystemPrior):
    """``phi = sum_k ||w_k||_2`` over rows, favouring few active rows."""

    name = "group"

    def phi(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(np.sum(np.sqrt(np.sum(w * w, axis=1))))

    def prox(self, w_tilde, beta: float, rho: float) -> np.ndarray:
        return group_shrink(w_tilde, _threshold(beta, rho))

    def subgradient(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        norms = np.sqrt(np.sum(w * w, axis=1, keepdims=True))
        return np.divide(w, norms, out=np.zeros_like(w), where=norms > 0)


class NuclearPrior(SystemPrior):
    """``phi = ||w||_*``, the sum of singular values."""

    name = "nuclear"

    def phi(self, w) -> float:
        return float(np.sum(np.linalg.svd(np.asarray(w, dtype=float), compute_uv=False)))

    def prox(self, w_tilde, beta: float, rho: float) -> np.ndarray:
        return singular_value_threshold(w_tilde, _threshold(beta, rho))

    def subgradient(self, w) -> np.ndarray:
        U, s, Vt = np.linalg.svd(np.asarray(w, dtype=float), full_matrices=False)
        keep = s > 0
        return U[:, keep] @ Vt[keep]


PRIORS = {
    "gaussian": GaussianPrior,
    "l1": L1Prior,
    "group": GroupPrior,
    "nuclear": NuclearPrior,
}
