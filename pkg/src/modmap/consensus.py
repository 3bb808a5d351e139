"""Consensus update: ``argmin_z ||z - zx||_F^2 + ||A(z) - zw||_F^2``.

The normal equations ``(I + G^T G) z = zx + G^T zw`` are block tridiagonal
with diagonal blocks ``2I + D^T D`` (``2I`` for the last index) and
off-diagonal blocks ``-D``. They are factorised once by block Cholesky; every
solve is then a forward and a backward sweep over time, which is what a
unit-covariance Kalman smoother computes.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg

from ._backend import kernels
from .core import ShapeError, TransitionModel, apply_transition_adjoint


class ConsensusSolver:
    """Pre-factorised solver for one ``(D, N)`` pair.

    A diagonal ``D`` decouples into ``K`` scalar tridiagonal systems; any
    other ``D`` uses the dense block factorisation.
    """

    def __init__(self, transition: TransitionModel, N: int):
        if N < 1:
            raise ShapeError(f"N must be >= 1, got {N}")
        self.transition = transition
        self.N = int(N)
        self.K = transition.K
        self.diagonal = transition.is_diagonal
        if self.diagonal:
            self._factor_scalar()
        else:
            self._factor_blocks()

    def _factor_scalar(self):
        K, N = self.K, self.N
        d = np.diag(self.transition.D)
        diag = np.empty((K, N))
        diag[:, :-1] = (2.0 + d * d)[:, np.newaxis]
        diag[:, -1] = 2.0
        l = np.empty((K, N))
        m = np.zeros((K, N))
        l[:, 0] = np.sqrt(diag[:, 0])
        for n in range(1, N):
            m[:, n] = -d / l[:, n - 1]
            l[:, n] = np.sqrt(diag[:, n] - m[:, n] ** 2)
        self._l = l
        self._m = m

    def _factor_blocks(self):
        K, N = self.K, self.N
        D = self.transition.D
        inner = 2.0 * np.eye(K) + D.T @ D
        L = np.empty((N, K, K))
        C = np.zeros((N, K, K))
        L[0] = linalg.cholesky(inner if N > 1 else 2.0 * np.eye(K), lower=True)
        for n in range(1, N):
            # C_n = -D L_{n-1}^{-T}
            C[n] = -linalg.solve_triangular(L[n - 1], D.T, lower=True).T
            A = inner if n < N - 1 else 2.0 * np.eye(K)
            L[n] = linalg.cholesky(A - C[n] @ C[n].T, lower=True)
        self._L = L
        self._C = C

    def normal_matrix(self) -> np.ndarray:
        """Dense ``I + G^T G`` with time-major ordering (for checks only)."""
        K, N = self.K, self.N
        G = np.eye(K * N)
        for n in range(1, N):
            G[n * K:(n + 1) * K, (n - 1) * K:n * K] = -self.transition.D
        return np.eye(K * N) + G.T @ G

    def solve(self, z_x_tilde, z_w_tilde) -> np.ndarray:
        zx = np.asarray(z_x_tilde, dtype=float)
        zw = np.asarray(z_w_tilde, dtype=float)
        if zx.ndim == 1:
            zx = zx[np.newaxis, :]
        if zw.ndim == 1:
            zw = zw[np.newaxis, :]
        shape = (self.K, self.N)
        if zx.shape != shape or zw.shape != shape:
            raise ShapeError(
                f"consensus inputs have shapes {zx.shape} and {zw.shape}, expected {shape}"
            )
        rhs = np.ascontiguousarray(zx + apply_transition_adjoint(zw, self.transition))
        out = np.empty(shape)
        if self.diagonal:
            kernels.tridiag_solve(self._l, self._m, rhs, out)
        else:
            kernels.block_solve(self._L, self._C, rhs, out)
        return out
